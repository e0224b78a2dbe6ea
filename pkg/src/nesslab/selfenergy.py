"""Reservoir self-energies as boundary values of Cauchy transforms.

xi_-(w) = int dk |u(k)|^2 / (w - w_k - i0) has real part equal to the principal
value of the density transform and imaginary part pi * J(w) >= 0, where
J(w) = int dk |u(k)|^2 delta(w - w_k) is the coupling spectral density.
xi_+ is the complex conjugate branch on the real axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonConvergence, OutOfBand
from .model import ReservoirChannel, PowerLawChannel

_GL_ORDER = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)
#: geometric endpoint grading: ratio 1/2, 12 levels (handles integrable edge
#: divergences of the density for exponents in (-1, 0))
_EDGE_LEVELS = 12
_POLE_LEVELS = 10


def spectral_density(res: ReservoirChannel, omega) -> float:
    """Coupling spectral density J(w); zero outside the band (not an error)."""
    return res.spectral_density(omega)


def _density_fn(res: ReservoirChannel) -> Callable:
    return res.spectral_density


def _graded_edges(a: float, b: float, interior: tuple[float, ...] = ()) -> np.ndarray:
    """Panel edges on [a, b], geometrically refined toward both band edges
    and toward each interior marker (pole location, offset scale)."""
    width = b - a
    pts = {a, b}
    for lv in range(1, _EDGE_LEVELS + 1):
        pts.add(a + width * 0.5 ** lv)
        pts.add(b - width * 0.5 ** lv)
    for x in interior:
        if a < x < b:
            pts.add(x)
            for lv in range(1, _POLE_LEVELS + 1):
                step = width * 0.5 ** lv
                if a < x - step:
                    pts.add(x - step)
                if x + step < b:
                    pts.add(x + step)
    return np.unique(np.fromiter(pts, dtype=float))


def _panel_quad(fn: Callable, edges: np.ndarray):
    """Composite Gauss-Legendre quadrature of a vectorized (real or complex) integrand."""
    lo = edges[:-1]
    half = 0.5 * np.diff(edges)
    nodes = lo[:, None] + half[:, None] * (_GL_X[None, :] + 1.0)
    vals = np.asarray(fn(nodes.ravel())).reshape(nodes.shape)
    return np.sum(vals * (half[:, None] * _GL_W[None, :]))


def principal_value(res: ReservoirChannel, omega: float) -> float:
    """PV int J(w')/(w - w') dw' by pole subtraction.

    The singular kernel is removed by subtracting J(w); the remainder is
    continuous for Hoelder densities and the subtracted mass integrates to
    J(w) * log((w - a)/(b - w)) in closed form.
    """
    a, b = res.band
    j = _density_fn(res)
    j0 = float(j(omega))
    edges = _graded_edges(a, b, interior=(omega,))

    def integrand(w):
        d = omega - w
        num = j0 - j(w)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -num / d
        return np.where(np.abs(d) < 1e-300, 0.0, out)

    smooth = float(_panel_quad(integrand, edges))
    return smooth + j0 * math.log((omega - a) / (b - omega))


def offset_value(res: ReservoirChannel, omega: float, delta: float) -> complex:
    """int J(w') / (w - w' - i*delta) dw' with pole-zone panel refinement."""
    a, b = res.band
    j = _density_fn(res)
    markers = [omega]
    for mul in (1.0, 2.0, 4.0, 8.0, 32.0):
        markers.extend((omega - mul * delta, omega + mul * delta))
    edges = _graded_edges(a, b, interior=tuple(markers))

    def integrand(w):
        d = omega - w
        return j(w) * (d + 1j * delta) / (d * d + delta * delta)

    return complex(_panel_quad(integrand, edges))


def exterior_value(res: ReservoirChannel, omega: float) -> complex:
    """Cauchy transform at real w strictly outside the band (no boundary value needed).

    Purely real: the density vanishes at w, so Im xi = 0 there.
    """
    a, b = res.band
    if a <= omega <= b:
        raise OutOfBand("exterior_value needs a point outside the band")
    j = _density_fn(res)
    edges = _graded_edges(a, b)

    def integrand(w):
        return j(w) / (omega - w)

    return complex(float(_panel_quad(integrand, edges)), 0.0)


def xi_minus(res: ReservoirChannel, omega: float, delta: float | None = None,
             method: str = "pv_quadrature", cross_tol: float = 5e-3) -> complex:
    """Lower boundary value xi_-(w) = Re + i*pi*J(w) on the band interior.

    method: "pv_quadrature" (pole-subtracted Gauss-Legendre), "complex_offset"
    (evaluate at w - i*delta and w - 2i*delta, Richardson-extrapolate), or
    "both" (cross-check the two real parts; disagreement raises NonConvergence).
    Points outside the band by more than one panel spacing raise OutOfBand.
    """
    a, b = res.band
    width = b - a
    edge_tol = width / 256.0
    if omega < a - edge_tol or omega > b + edge_tol:
        raise OutOfBand(f"omega={omega} outside band [{a}, {b}]")
    # clamp near-edge requests just inside so the log term stays finite
    omega = min(max(omega, a + 1e-3 * edge_tol), b - 1e-3 * edge_tol)
    if delta is None:
        delta = 1e-4 * width
    im = math.pi * float(_density_fn(res)(omega))

    if method == "pv_quadrature":
        return complex(principal_value(res, omega), im)
    if method == "complex_offset":
        f1 = offset_value(res, omega, delta)
        f2 = offset_value(res, omega, 2.0 * delta)
        rich = 2.0 * f1 - f2
        return complex(rich.real, im)
    if method == "both":
        re_pv = principal_value(res, omega)
        f1 = offset_value(res, omega, delta)
        f2 = offset_value(res, omega, 2.0 * delta)
        re_off = (2.0 * f1 - f2).real
        scale = max(1.0, abs(re_pv), abs(re_off))
        if abs(re_pv - re_off) > cross_tol * scale:
            raise NonConvergence(
                f"pv_quadrature and complex_offset disagree at omega={omega}: "
                f"{re_pv} vs {re_off}")
        return complex(re_pv, im)
    raise ValueError(f"unknown method {method!r}")


def eta_minus(res: ReservoirChannel, omega: float, **kw) -> complex:
    """Right-reservoir branch; same boundary value with that channel's density."""
    return xi_minus(res, omega, **kw)


def boundary_or_exterior(res: ReservoirChannel, omega: float) -> complex:
    """xi_-(w) inside the band, the (real) Cauchy transform outside."""
    a, b = res.band
    pad = 1e-9 * (b - a)
    if a + pad < omega < b - pad:
        return xi_minus(res, omega)
    return exterior_value(res, omega) if not (a <= omega <= b) else xi_minus(res, omega)


def total_density_mass(res: ReservoirChannel) -> float:
    """int J(w) dw over the band (used by the far-field decay bound)."""
    a, b = res.band
    return float(_panel_quad(_density_fn(res), _graded_edges(a, b)))


@dataclass(frozen=True)
class SpectralDensity:
    """Density J(w) >= 0 supported on the channel band."""

    evaluate: Callable
    band: tuple[float, float]
    provenance: str  # "closed_form" | "quadrature"

    @classmethod
    def from_channel(cls, res: ReservoirChannel) -> "SpectralDensity":
        prov = "closed_form" if isinstance(res, PowerLawChannel) else "quadrature"
        return cls(res.spectral_density, res.band, prov)


@dataclass(frozen=True)
class SelfEnergy:
    """Callable boundary value xi_-(w); the xi_+ branch is its conjugate."""

    evaluate: Callable
    band: tuple[float, float]

    @classmethod
    def from_channel(cls, res: ReservoirChannel, method: str = "pv_quadrature",
                     delta: float | None = None) -> "SelfEnergy":
        def ev(omega: float) -> complex:
            return xi_minus(res, omega, delta=delta, method=method)
        return cls(ev, res.band)

    def plus(self, omega: float) -> complex:
        return np.conj(self.evaluate(omega))
