"""Interaction-picture cocycles by the iterated integral-equation series.

Gamma solves Gamma'(t) = i Gamma(t) tau_t(V) with Gamma(0) = 1, where
tau_t(A) = e^{i H0 t} A e^{-i H0 t}; the closed form e^{iHt} e^{-iH0 t}
(H = H0 + V) serves as the test oracle.  Orders are built recursively from
samples of the previous order on a shared Gauss-Legendre node set, with the
cumulative integrals done by an exact per-panel Legendre antiderivative; the
truncation order comes a priori from the factorial norm bound and is validated
a posteriori by the integral-equation residual.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonConvergence, TruncationBudget

_ORDER_CAP = 40
_PANEL_NODES = 32


def _legendre_cumulative(q: int):
    """Nodes x_i on [-1, 1] plus matrices C (cumulative from -1 at the nodes)
    and row e (full integral), exact for polynomial degree < q."""
    x, w = np.polynomial.legendre.leggauss(q)
    # projection onto Legendre coefficients: c_n = (2n+1)/2 sum_i w_i P_n(x_i) f_i
    vand = np.polynomial.legendre.legvander(x, q - 1)  # (i, n) = P_n(x_i)
    proj = ((2.0 * np.arange(q) + 1.0) / 2.0)[:, None] * (vand.T * w[None, :])
    # antiderivative in coefficient space, lower bound -1
    anti = np.zeros((q + 1, q))
    for n in range(q):
        c = np.zeros(q)
        c[n] = 1.0
        anti[:, n] = np.polynomial.legendre.legint(c, lbnd=-1)
    vand_full = np.polynomial.legendre.legvander(x, q)
    cum = vand_full @ anti @ proj
    end = np.polynomial.legendre.legvander(np.array([1.0]), q)[0] @ anti @ proj
    return x, cum, end


_GL_X, _GL_CUM, _GL_END = _legendre_cumulative(_PANEL_NODES)


def _order_from_bound(strength: float, span: float, tol: float) -> int:
    """Smallest n with (strength * span)^n / n! < tol (factorial bound)."""
    if strength * span == 0.0:
        return 0
    bound = 1.0
    for n in range(1, _ORDER_CAP + 1):
        bound *= strength * span / n
        if bound < tol:
            return n
    raise TruncationBudget(
        f"series order beyond {_ORDER_CAP} for ||V|| (t-s) = {strength * span:.3g}")


class _NodeSet:
    """Shared quadrature nodes on [s, t] with cumulative-integral application."""

    def __init__(self, s: float, t: float, n_panels: int):
        edges = np.linspace(s, t, n_panels + 1)
        self.halves = 0.5 * np.diff(edges)
        self.times = np.concatenate([
            lo + h * (_GL_X + 1.0)
            for lo, h in zip(edges[:-1], self.halves)])
        self.n_panels = n_panels

    def cumulative(self, samples: np.ndarray):
        """Running integral of matrix samples at all nodes plus the endpoint value."""
        q = _PANEL_NODES
        d = samples.shape[-1]
        out = np.empty_like(samples)
        prefix = np.zeros((d, d), dtype=complex)
        for p in range(self.n_panels):
            block = samples[p * q:(p + 1) * q]
            h = self.halves[p]
            out[p * q:(p + 1) * q] = prefix + h * np.einsum(
                "ij,jab->iab", _GL_CUM, block)
            prefix = prefix + h * np.einsum("j,jab->ab", _GL_END, block)
        return out, prefix


@dataclass(frozen=True)
class DysonPropagator:
    """Series solution of the cocycle integral equation on matrices."""

    h0: np.ndarray
    v_used: np.ndarray  # V at t for nonautonomous input, V itself otherwise
    t: float
    s: float
    value: np.ndarray
    series_terms: int
    residual: float


def _free_conjugation(h0_eig, s: float, mat: np.ndarray) -> np.ndarray:
    evals, evecs = h0_eig
    phase = np.exp(1j * evals * s)
    inner = (evecs.conj().T @ mat @ evecs)
    return evecs @ (phase[:, None] * inner * np.conj(phase)[None, :]) @ evecs.conj().T


def free_evolution(h0, s: float, mat) -> np.ndarray:
    """tau_s(A) = e^{i H0 s} A e^{-i H0 s}."""
    h0 = np.asarray(h0, dtype=complex)
    evals, evecs = np.linalg.eigh(h0)
    return _free_conjugation((evals, evecs), s, np.asarray(mat, dtype=complex))


def _series(h0, v_at: Callable[[float], np.ndarray], t: float, s: float,
            strength: float, tol: float) -> DysonPropagator:
    h0 = np.asarray(h0, dtype=complex)
    d = h0.shape[0]
    span = abs(t - s)
    order = _order_from_bound(strength, span, tol)
    eye = np.eye(d, dtype=complex)
    if order == 0 or span == 0.0:
        return DysonPropagator(h0, v_at(t), t, s, eye.copy(), 0, 0.0)

    h0_eig = np.linalg.eigh(h0)
    # panels must resolve both the coupling strength and the free phases
    h0_scale = float(np.linalg.norm(h0, 2))
    n_panels = max(1, math.ceil(strength * span / 1.5),
                   math.ceil(span * h0_scale / 6.0))
    nodes = _NodeSet(s, t, n_panels)
    kernels = np.stack([
        _free_conjugation(h0_eig, t1 - s, v_at(t1)) for t1 in nodes.times])

    gamma_nodes = np.broadcast_to(eye, kernels.shape).copy()
    gamma_end = eye.copy()
    term_nodes = np.broadcast_to(eye, kernels.shape).copy()
    for _ in range(order):
        integrand = 1j * np.einsum("kab,kbc->kac", term_nodes, kernels)
        term_nodes, term_end = nodes.cumulative(integrand)
        gamma_nodes = gamma_nodes + term_nodes
        gamma_end = gamma_end + term_end

    # integral-equation residual with the assembled solution
    integrand = 1j * np.einsum("kab,kbc->kac", gamma_nodes, kernels)
    _, full = nodes.cumulative(integrand)
    residual = float(np.linalg.norm(gamma_end - eye - full, 2))
    if residual > 10.0 * tol:
        raise NonConvergence(
            f"integral-equation residual {residual:.3e} exceeds 10*tol")
    return DysonPropagator(h0, v_at(t), t, s, gamma_end, order, residual)


def dyson_gamma(h0, v, t: float, tol: float = 1e-10) -> DysonPropagator:
    """Autonomous cocycle Gamma_t = 1 + i int_0^t Gamma_u tau_u(V) du."""
    v = np.asarray(v, dtype=complex)
    strength = float(np.linalg.norm(v, 2))
    return _series(h0, lambda _t: v, t, 0.0, strength, tol)


def nonautonomous_gamma(h0, v_of_t: Callable[[float], np.ndarray], t: float,
                        s: float, tol: float = 1e-10,
                        strength: float | None = None) -> DysonPropagator:
    """Two-time cocycle Gamma_{t,s} = 1 + i int_s^t Gamma_{t1,s} tau_{t1-s}(V(t1)) dt1.

    The truncation bound uses K = sup ||V(u)|| over [s, t] (probed on the
    quadrature nodes unless supplied).
    """
    def v_at(u: float) -> np.ndarray:
        return np.asarray(v_of_t(u), dtype=complex)

    if strength is None:
        probes = np.linspace(min(s, t), max(s, t), 33)
        strength = max(float(np.linalg.norm(v_at(u), 2)) for u in probes)
    return _series(h0, v_at, t, s, strength, tol)


def perturbed_step(h0, v, a, t: float, tol: float = 1e-10) -> np.ndarray:
    """Perturbed Heisenberg step Gamma_t tau_t(A) Gamma_t^+.

    Its derivative at t = 0 is i[H0, A] + i[V, A], the perturbed generator.
    """
    h0 = np.asarray(h0, dtype=complex)
    a = np.asarray(a, dtype=complex)
    gamma = dyson_gamma(h0, v, t, tol).value
    return gamma @ free_evolution(h0, t, a) @ gamma.conj().T
