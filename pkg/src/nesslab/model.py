"""Physical model records: finite system, reservoir channels, thermodynamics, grids.

All records are immutable after construction and all operations are pure, so
values can be shared freely across threads or processes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError

#: Sentinel for zero temperature (beta -> infinity). The Fermi factor then
#: degenerates to a step with value 1/2 exactly at the chemical potential.
INF_BETA = math.inf

_PROBE_POINTS = 1024


def fermi_factor(beta: float, mu: float, x) -> float:
    """Occupation 1/(exp(beta*(x - mu)) + 1); beta = INF_BETA gives the step."""
    x = np.asarray(x, dtype=float)
    if math.isinf(beta):
        out = np.where(x < mu, 1.0, np.where(x > mu, 0.0, 0.5))
        return float(out) if out.ndim == 0 else out
    arg = np.clip(beta * (x - mu), -700.0, 700.0)
    out = 1.0 / (np.exp(arg) + 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SystemSpec:
    """Finite-system levels and the coupling vectors seen by each reservoir."""

    levels: np.ndarray
    coupling_l: np.ndarray
    coupling_r: np.ndarray

    def __post_init__(self):
        levels = np.atleast_1d(np.asarray(self.levels, dtype=float))
        wl = np.atleast_1d(np.asarray(self.coupling_l, dtype=complex))
        wr = np.atleast_1d(np.asarray(self.coupling_r, dtype=complex))
        if levels.size < 1:
            raise ConfigError("system needs at least one level")
        if not (levels.size == wl.size == wr.size):
            raise ConfigError("levels and coupling vectors must share one length")
        if not np.all(np.isfinite(levels)):
            raise ConfigError("levels must be finite")
        if not (np.all(np.isfinite(wl)) and np.all(np.isfinite(wr))):
            raise ConfigError("couplings must be finite")
        for name, val in (("levels", levels), ("coupling_l", wl), ("coupling_r", wr)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def size(self) -> int:
        return self.levels.size

    def spread(self) -> float:
        """Scale of the level set, used for pole-proximity thresholds."""
        s = float(self.levels.max() - self.levels.min())
        return s if s > 0.0 else max(1.0, float(np.abs(self.levels).max()))


@dataclass(frozen=True)
class ChainSpec:
    """Uniform open chain: n sites, hopping t, on-site energy u."""

    n: int
    t: float
    u: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("chain needs n >= 1 sites")


def sine_transform_matrix(n: int) -> np.ndarray:
    """Orthogonal open-chain eigenmode matrix W[l, j] = sqrt(2/(n+1)) sin(pi*l*j/(n+1))."""
    lam = np.arange(1, n + 1)
    return np.sqrt(2.0 / (n + 1)) * np.sin(np.pi * np.outer(lam, lam.copy()) / (n + 1))


def make_chain_system(chain: ChainSpec, v_l: float, v_r: float) -> SystemSpec:
    """Diagonalize the open chain and express the end-site couplings in the level basis.

    Level lam carries energy 2*t*cos(pi*lam/(n+1)) + u; the left (right) reservoir
    couples through site 1 (site n) with amplitude v_l (v_r) times the sine weight.
    """
    n = chain.n
    lam = np.arange(1, n + 1)
    levels = 2.0 * chain.t * np.cos(np.pi * lam / (n + 1)) + chain.u
    w = math.sqrt(2.0 / (n + 1))
    coupling_l = v_l * w * np.sin(np.pi * lam / (n + 1))
    coupling_r = v_r * w * np.sin(np.pi * n * lam / (n + 1))
    return SystemSpec(levels, coupling_l, coupling_r)


@dataclass(frozen=True)
class ReservoirChannel:
    """One reservoir: dispersion and coupling profile over a finite k-domain.

    The dispersion must be strictly monotone on the domain (checked on a probe
    grid) so the band, the density of states, and uniform-energy mode grids are
    well defined.  ``radial=True`` switches the measure from dk to 2*pi*k dk.
    """

    dispersion: Callable[[np.ndarray], np.ndarray]
    coupling: Callable[[np.ndarray], np.ndarray]
    k_domain: tuple[float, float]
    radial: bool = False
    band: tuple[float, float] = field(init=False)
    _probe_k: np.ndarray = field(init=False, repr=False)
    _probe_w: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lo, hi = float(self.k_domain[0]), float(self.k_domain[1])
        if not hi > lo:
            raise ConfigError("k_domain must be a nonempty interval")
        object.__setattr__(self, "k_domain", (lo, hi))
        ks = np.linspace(lo, hi, _PROBE_POINTS)
        ws = np.asarray(self.dispersion(ks), dtype=float)
        if not np.all(np.isfinite(ws)):
            raise ConfigError("dispersion must be finite on the k-domain")
        dw = np.diff(ws)
        if not (np.all(dw > 0) or np.all(dw < 0)):
            raise ConfigError("dispersion must be strictly monotone on the k-domain")
        band = (float(ws.min()), float(ws.max()))
        object.__setattr__(self, "band", band)
        if ws[0] > ws[-1]:
            ks, ws = ks[::-1], ws[::-1]
        object.__setattr__(self, "_probe_k", ks)
        object.__setattr__(self, "_probe_w", ws)
        # square-integrability of the coupling, checked on the probe grid
        total = self._measure(self._probe_k) * np.abs(
            np.asarray(self.coupling(self._probe_k), dtype=complex)
        ) ** 2
        inner = total[1:-1]  # endpoints may carry an integrable divergence
        if not np.all(np.isfinite(inner)):
            raise ConfigError("coupling must be square integrable over the k-domain")

    def _measure(self, k):
        return 2.0 * np.pi * np.abs(k) if self.radial else np.ones_like(np.asarray(k, float))

    def band_width(self) -> float:
        return self.band[1] - self.band[0]

    def contains(self, omega: float, tol: float = 0.0) -> bool:
        return self.band[0] - tol <= omega <= self.band[1] + tol

    def invert_dispersion(self, omega):
        """k with dispersion(k) = omega, by monotone interpolation of the probe grid."""
        return np.interp(omega, self._probe_w, self._probe_k)

    def dos(self, omega):
        """Density of states dk/dw (including the radial measure) at in-band omega."""
        omega = np.asarray(omega, dtype=float)
        k = self.invert_dispersion(omega)
        span = self.k_domain[1] - self.k_domain[0]
        h = 1e-7 * span
        k0 = np.clip(k, self.k_domain[0] + h, self.k_domain[1] - h)
        slope = (self.dispersion(k0 + h) - self.dispersion(k0 - h)) / (2 * h)
        return self._measure(k) / np.abs(slope)

    def spectral_density(self, omega):
        """|u(k(w))|^2 dk/dw, zero outside the band."""
        omega = np.asarray(omega, dtype=float)
        inside = (omega >= self.band[0]) & (omega <= self.band[1])
        out = np.zeros_like(omega)
        if np.any(inside):
            w_in = omega[inside] if omega.ndim else omega
            k = self.invert_dispersion(w_in)
            val = np.abs(np.asarray(self.coupling(k), dtype=complex)) ** 2 * self.dos(w_in)
            if omega.ndim:
                out[inside] = val
            else:
                out = val
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PowerLawChannel(ReservoirChannel):
    """2-D radial reservoir with u(k) = v*|k|^alpha and dispersion theta_f*(|k| - k0).

    The band is [-theta_f*k0, theta_f*(k_max - k0)].  The spectral density has
    the closed form 2*pi*v^2/theta_f * ((w + theta_f*k0)/theta_f)^(2*alpha + 1).
    """

    v: float = 1.0
    alpha: float = 0.0
    theta_f: float = 1.0
    k0: float = 0.0
    k_max: float = 1.0

    def __init__(self, v, alpha, theta_f, k0, k_max):
        if theta_f <= 0:
            raise ConfigError("theta_f must be positive")
        if k0 < 0:
            raise ConfigError("k0 must be nonnegative")
        if k_max <= k0:
            raise ConfigError("k_max must exceed k0")
        for name, val in (("v", float(v)), ("alpha", float(alpha)),
                          ("theta_f", float(theta_f)), ("k0", float(k0)),
                          ("k_max", float(k_max))):
            object.__setattr__(self, name, val)
        super().__init__(
            dispersion=lambda k: theta_f * (np.abs(k) - k0),
            coupling=lambda k: v * np.power(np.maximum(np.abs(k), 1e-300), alpha),
            k_domain=(0.0, k_max),
            radial=True,
        )

    def invert_dispersion(self, omega):
        return np.asarray(omega, dtype=float) / self.theta_f + self.k0

    def dos(self, omega):
        return 2.0 * np.pi * self.invert_dispersion(omega) / self.theta_f

    def spectral_density(self, omega):
        omega = np.asarray(omega, dtype=float)
        x = omega / self.theta_f + self.k0
        inside = (omega >= self.band[0]) & (omega <= self.band[1]) & (x > 0)
        val = np.zeros_like(omega)
        exponent = 2.0 * self.alpha + 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            body = 2.0 * np.pi * self.v ** 2 / self.theta_f * np.power(
                np.where(x > 0, x, 1.0), exponent
            )
        val = np.where(inside, body, 0.0)
        return float(val) if val.ndim == 0 else val


def flat_channel(gamma: float, center: float, half_width: float) -> PowerLawChannel:
    """Wideband-style channel with constant Im xi = gamma over [center - W, center + W].

    Uses alpha = -1/2 (flat density) with theta_f = 1; gamma = pi * J = 2 pi^2 v^2.
    """
    if gamma < 0 or half_width <= 0:
        raise ConfigError("flat channel needs gamma >= 0 and half_width > 0")
    if center > half_width:
        raise ConfigError("power-law dispersion needs a band lower edge <= 0")
    v = math.sqrt(gamma / (2.0 * math.pi ** 2))
    return PowerLawChannel(v=v, alpha=-0.5, theta_f=1.0,
                           k0=half_width - center, k_max=2.0 * half_width)


@dataclass(frozen=True)
class ThermoState:
    """Per-reservoir inverse temperatures and chemical potentials."""

    beta_l: float
    beta_r: float
    mu_l: float
    mu_r: float

    def __post_init__(self):
        for b in (self.beta_l, self.beta_r):
            if not (b > 0):  # INF_BETA passes
                raise ConfigError("inverse temperatures must be positive (or INF_BETA)")

    def swapped(self) -> "ThermoState":
        return ThermoState(self.beta_r, self.beta_l, self.mu_r, self.mu_l)


@dataclass(frozen=True)
class FrequencyGrid:
    """Quadrature nodes and positive weights on a frequency interval."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.size != weights.size:
            raise ConfigError("nodes and weights must have equal length")
        if nodes.size and not np.all(np.diff(nodes) > 0):
            raise ConfigError("nodes must be strictly increasing")
        if not np.all(weights > 0):
            raise ConfigError("weights must be positive")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return self.nodes.size

    @classmethod
    def midpoint(cls, a: float, b: float, n: int) -> "FrequencyGrid":
        if not (b > a and n >= 1):
            raise ConfigError("midpoint grid needs b > a and n >= 1")
        h = (b - a) / n
        nodes = a + (np.arange(n) + 0.5) * h
        return cls(nodes, np.full(n, h), kind="midpoint")

    @classmethod
    def gauss_panels(cls, a: float, b: float, n_panels: int, order: int = 16,
                     breakpoints: Sequence[float] = ()) -> "FrequencyGrid":
        """Composite Gauss-Legendre grid, with optional forced panel edges."""
        if not (b > a and n_panels >= 1):
            raise ConfigError("gauss grid needs b > a and n_panels >= 1")
        edges = np.unique(np.concatenate([
            np.linspace(a, b, n_panels + 1),
            [x for x in breakpoints if a < x < b],
        ]))
        x, w = np.polynomial.legendre.leggauss(order)
        nodes, weights = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = 0.5 * (hi - lo)
            nodes.append(lo + half * (x + 1.0))
            weights.append(half * w)
        return cls(np.concatenate(nodes), np.concatenate(weights), kind="gauss")

    def refined(self) -> "FrequencyGrid":
        """Grid with doubled resolution over the same interval hull."""
        a = self.nodes[0] - 0.5 * self.weights[0]
        b = self.nodes[-1] + 0.5 * self.weights[-1]
        n = len(self)
        if self.kind == "gauss":
            return FrequencyGrid.gauss_panels(self.nodes[0], self.nodes[-1],
                                              max(2, (n // 16) * 2), 16)
        return FrequencyGrid.midpoint(min(a, self.nodes[0]), max(b, self.nodes[-1]), 2 * n)


def band_union(res_l: ReservoirChannel, res_r: ReservoirChannel) -> tuple[float, float]:
    """Smallest interval containing both reservoir bands; bounds all w-integrations."""
    return (min(res_l.band[0], res_r.band[0]), max(res_l.band[1], res_r.band[1]))


def band_intersection(res_l: ReservoirChannel, res_r: ReservoirChannel):
    """Overlap of the two bands, or None when they are disjoint."""
    lo = max(res_l.band[0], res_r.band[0])
    hi = min(res_l.band[1], res_r.band[1])
    return (lo, hi) if hi > lo else None


def uniform_energy_modes(channel: ReservoirChannel, m: int):
    """Midpoint mode grid uniform in energy: (energies, k-values, measure weights).

    The weights carry the k-measure: sum_j W_j F(k_j) approximates the channel's
    dk-integral of F, so couplings scale as u(k_j)*sqrt(W_j) on a lattice.
    """
    if m < 2:
        raise ConfigError("need at least 2 modes per reservoir")
    a, b = channel.band
    h = (b - a) / m
    energies = a + (np.arange(m) + 0.5) * h
    ks = channel.invert_dispersion(energies)
    weights = channel.dos(energies) * h
    return energies, np.asarray(ks, dtype=float), weights
