"""System propagator functions S and the linear-solve route used for transmission.

S and Lambda individually carry spurious poles at the system levels that cancel
in the ratio S_LR/Lambda; the dense-solve route through the dressed matrix
M(z) = diag(z - e) - xi * w_L w_L^+ - eta * w_R w_R^+ avoids the cancellation
and stays finite at the levels whenever Im xi > 0 or Im eta > 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PoleHit, SingularMatrix
from .model import SystemSpec


@dataclass(frozen=True)
class SMatrix:
    """The four propagator entries at one complex frequency."""

    s_ll: complex
    s_lr: complex
    s_rl: complex
    s_rr: complex
    z: complex


def s_matrix(sys: SystemSpec, z: complex) -> SMatrix:
    """S_{vv'}(z) = sum_l w^v_l conj(w^v'_l) / (z - e_l).

    Raises PoleHit when z sits within 1e-12 * spread of a level.
    """
    z = complex(z)
    diff = z - sys.levels
    if np.min(np.abs(diff)) < 1e-12 * sys.spread():
        raise PoleHit(f"z={z} collides with a system level")
    inv = 1.0 / diff
    wl, wr = sys.coupling_l, sys.coupling_r
    return SMatrix(
        s_ll=complex(np.sum(wl * np.conj(wl) * inv)),
        s_lr=complex(np.sum(wl * np.conj(wr) * inv)),
        s_rl=complex(np.sum(wr * np.conj(wl) * inv)),
        s_rr=complex(np.sum(wr * np.conj(wr) * inv)),
        z=z,
    )


def coupled_matrix(sys: SystemSpec, xi: complex, eta: complex, z: complex) -> np.ndarray:
    """M(z) = diag(z - e) - xi * w_L w_L^+ - eta * w_R w_R^+."""
    wl, wr = sys.coupling_l, sys.coupling_r
    m = np.diag(z - sys.levels.astype(complex))
    m -= xi * np.outer(wl, np.conj(wl))
    m -= eta * np.outer(wr, np.conj(wr))
    return m


def resolvent_columns(sys: SystemSpec, xi: complex, eta: complex, z: complex):
    """Solve M(z) x = w for both coupling vectors; residual-checked.

    Returns (x_l, x_r) with x_v = M^{-1} w^v.  Never forms M^{-1} explicitly.
    """
    m = coupled_matrix(sys, xi, eta, z)
    rhs = np.stack([sys.coupling_l, sys.coupling_r], axis=1).astype(complex)
    try:
        sol = np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(str(exc)) from exc
    resid = np.linalg.norm(m @ sol - rhs)
    scale = np.linalg.norm(rhs)
    if scale > 0 and resid > 1e-8 * scale:
        raise SingularMatrix(f"solve residual {resid:.3e} exceeds 1e-8 * ||rhs||")
    return sol[:, 0], sol[:, 1]


def effective_inverse(sys: SystemSpec, xi: complex, eta: complex, z: complex):
    """(g_lr, g_ll) with g_lr = w_R^+ M^{-1} w_L and g_ll = w_L^+ M^{-1} w_L.

    By the rank-2 Woodbury identity g_lr equals s_lr / Lambda_- with both
    factors on the same branch, but without their spurious level poles.
    """
    x_l, _ = resolvent_columns(sys, xi, eta, z)
    g_lr = complex(np.vdot(sys.coupling_r, x_l))
    g_ll = complex(np.vdot(sys.coupling_l, x_l))
    return g_lr, g_ll
