"""Transmission function, Fermi factors, and the steady-state particle current.

The current is the growth rate of the left-reservoir particle number,
J = int T(w) (f_R(w) - f_L(w)) dw, so a higher left chemical potential drives
J < 0 (the left reservoir drains).  The prefactor inside T and an optional
1/(2*pi) measure are configurable; the lattice oracle adjudicates the physical
combination (see README).
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import GridTooCoarse
from .model import (FrequencyGrid, ReservoirChannel, SystemSpec, ThermoState,
                    band_intersection, fermi_factor)
from .selfenergy import xi_minus
from .sfunc import SMatrix, effective_inverse


def max_workers() -> int:
    """Worker cap from NESS_THREADS (0 or unset = auto)."""
    raw = os.environ.get("NESS_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def lambda_minus(s: SMatrix, xi: complex, eta: complex) -> complex:
    """Lambda = 1 - (eta s_RR + xi s_LL) + xi eta (s_LL s_RR - s_LR s_RL)."""
    return 1.0 - (eta * s.s_rr + xi * s.s_ll) + xi * eta * (
        s.s_ll * s.s_rr - s.s_lr * s.s_rl)


def fermi(th: ThermoState, side: str, omega: float) -> float:
    """Reservoir occupation f_nu(w) in [0, 1]; side is 'L' or 'R'."""
    if side == "L":
        return fermi_factor(th.beta_l, th.mu_l, omega)
    if side == "R":
        return fermi_factor(th.beta_r, th.mu_r, omega)
    raise ValueError(f"side must be 'L' or 'R', got {side!r}")


def transmission_kernel(sys: SystemSpec, omega: float, xi: complex, eta: complex,
                        prefactor: float = 2.0) -> float:
    """prefactor * |g_LR|^2 * Im xi * Im eta at given self-energy values."""
    if xi.imag <= 0.0 or eta.imag <= 0.0:
        return 0.0
    g_lr, _ = effective_inverse(sys, xi, eta, complex(omega))
    return prefactor * abs(g_lr) ** 2 * xi.imag * eta.imag


def transmission(sys: SystemSpec, res_l: ReservoirChannel, res_r: ReservoirChannel,
                 omega: float, prefactor: float = 2.0,
                 delta: float | None = None) -> float:
    """Energy-resolved transition rate T(w); zero outside either band."""
    pad_l = 1e-12 * res_l.band_width()
    pad_r = 1e-12 * res_r.band_width()
    if not (res_l.band[0] + pad_l < omega < res_l.band[1] - pad_l):
        return 0.0
    if not (res_r.band[0] + pad_r < omega < res_r.band[1] - pad_r):
        return 0.0
    xi = xi_minus(res_l, omega, delta=delta)
    eta = xi_minus(res_r, omega, delta=delta)
    return transmission_kernel(sys, omega, xi, eta, prefactor)


@dataclass(frozen=True)
class TransmissionCurve:
    """Sampled transmission with the prefactor convention it was built under."""

    grid: FrequencyGrid
    values: np.ndarray
    prefactor: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def transmission_curve(sys: SystemSpec, res_l: ReservoirChannel,
                       res_r: ReservoirChannel, grid: FrequencyGrid,
                       prefactor: float = 2.0) -> TransmissionCurve:
    """Evaluate T on a grid; points are independent and run on a thread pool."""
    nodes = list(grid.nodes)
    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        vals = list(pool.map(
            lambda w: transmission(sys, res_l, res_r, w, prefactor), nodes))
    return TransmissionCurve(grid, np.array(vals), prefactor)


def _current_integrand(sys, res_l, res_r, th, prefactor):
    def f(omega: float) -> float:
        t = transmission(sys, res_l, res_r, omega, prefactor)
        if t == 0.0:
            return 0.0
        return t * (fermi(th, "R", omega) - fermi(th, "L", omega))
    return f


def steady_current(sys: SystemSpec, res_l: ReservoirChannel, res_r: ReservoirChannel,
                   th: ThermoState, grid: FrequencyGrid | None = None,
                   prefactor: float = 2.0, measure_2pi: bool = False,
                   refine_check: bool = True) -> float:
    """Steady-state current J = int T(w) (f_R - f_L) dw over the band overlap.

    With no grid, adaptive Gauss-Kronrod panels (budget 2000) refine around the
    resonances and Fermi edges.  With an explicit grid the quadrature is redone
    on a doubled grid; a relative change above 1e-4 raises GridTooCoarse.
    measure_2pi divides the result by 2*pi.
    """
    overlap = band_intersection(res_l, res_r)
    if overlap is None:
        return 0.0
    a, b = overlap
    integrand = _current_integrand(sys, res_l, res_r, th, prefactor)
    scale = 1.0 / (2.0 * math.pi) if measure_2pi else 1.0

    if grid is None:
        marks = sorted({float(e) for e in sys.levels if a < e < b}
                       | {m for m in (th.mu_l, th.mu_r) if a < m < b})
        j, abserr = integrate.quad(integrand, a, b, points=marks or None,
                                   limit=2000)
        if refine_check and abserr > max(1e-4 * abs(j), 1e-12):
            raise GridTooCoarse(
                f"adaptive panels report error {abserr:.3e} on J={j:.6e}")
        return scale * j

    def quad_on(g: FrequencyGrid) -> float:
        vals = np.array([integrand(w) for w in g.nodes])
        return float(np.sum(vals * g.weights))

    j1 = quad_on(grid)
    if not refine_check:
        return scale * j1
    j2 = quad_on(grid.refined())
    denom = max(abs(j2), 1e-300)
    if abs(j2 - j1) > 1e-4 * denom and abs(j2 - j1) > 1e-14:
        raise GridTooCoarse(
            f"doubling the grid moved J from {j1:.8e} to {j2:.8e}")
    return scale * j2
