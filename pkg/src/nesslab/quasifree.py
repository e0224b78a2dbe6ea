"""Quasi-free expectation values: thermal two-point kernels, the determinant
form of higher moments, an exact Fock-space oracle for small mode counts, the
finite-matrix thermal-state identity, and the commutator-decay diagnostic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import GridMismatch, TooManyModes
from .model import fermi_factor

_FOCK_CAP = 8


@dataclass(frozen=True)
class TwoPointKernel:
    """<a(f)^+ a(g)> backed by per-mode occupations in [0, 1].

    evaluate(f, g) = sum_j W_j f_j conj(g_j) n_j; Hermitian in (f, g) and
    bounded by ||f||^2 on the diagonal.
    """

    energies: np.ndarray
    occupations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        n = np.asarray(self.occupations, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if not (e.size == n.size == w.size):
            raise GridMismatch("energies, occupations, weights must align")
        if np.any(n < -1e-12) or np.any(n > 1 + 1e-12):
            raise ValueError("occupations must lie in [0, 1]")
        for name, val in (("energies", e), ("occupations", n), ("weights", w)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @classmethod
    def thermal(cls, energies, beta: float, mu: float, weights=None) -> "TwoPointKernel":
        energies = np.asarray(energies, dtype=float)
        if weights is None:
            weights = np.ones_like(energies)
        occ = fermi_factor(beta, mu, energies)
        return cls(energies, np.atleast_1d(occ), weights)

    @classmethod
    def from_channels(cls, channels: Sequence[tuple]) -> "TwoPointKernel":
        """Concatenate independent reservoirs, each (energies, beta, mu[, weights]).

        Coefficient vectors for the combined kernel are the concatenations of
        the per-channel vectors, matching the multi-reservoir two-point sum.
        """
        parts = [cls.thermal(*ch) for ch in channels]
        return cls(np.concatenate([p.energies for p in parts]),
                   np.concatenate([p.occupations for p in parts]),
                   np.concatenate([p.weights for p in parts]))

    def __len__(self) -> int:
        return self.energies.size

    def _check(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=complex)
        if f.size != len(self):
            raise GridMismatch(f"vector length {f.size} != grid size {len(self)}")
        return f

    def evaluate(self, f, g) -> complex:
        f = self._check(f)
        g = self._check(g)
        return complex(np.sum(self.weights * f * np.conj(g) * self.occupations))

    def norm_sq(self, f) -> float:
        f = self._check(f)
        return float(np.sum(self.weights * np.abs(f) ** 2))


def kms_two_point(f, g, beta: float, mu: float, dispersion, kgrid,
                  weights=None) -> complex:
    """Thermal two-point value for vectors sampled on a k-grid.

    Quadrature of f(k) conj(g(k)) / (exp(beta*(w_k - mu)) + 1).
    """
    kgrid = np.asarray(kgrid, dtype=float)
    energies = np.asarray(dispersion(kgrid), dtype=float)
    kernel = TwoPointKernel.thermal(energies, beta, mu, weights)
    return kernel.evaluate(f, g)


@dataclass(frozen=True)
class OperatorString:
    """Ordered creation vectors f_1..f_n and annihilation vectors g_m..g_1.

    Represents a(f_1)^+ ... a(f_n)^+ a(g_m) ... a(g_1): annihilators apply in
    reversed index order, matching the determinant convention below.
    """

    creators: tuple
    annihilators: tuple

    def __post_init__(self):
        cs = tuple(np.asarray(f, dtype=complex) for f in self.creators)
        gs = tuple(np.asarray(g, dtype=complex) for g in self.annihilators)
        sizes = {v.size for v in cs + gs}
        if len(sizes) > 1:
            raise GridMismatch("all string vectors must share one mode grid")
        object.__setattr__(self, "creators", cs)
        object.__setattr__(self, "annihilators", gs)

    def adjoint(self) -> "OperatorString":
        """String of the adjoint operator (roles swapped, orders reversed)."""
        return OperatorString(tuple(reversed(self.annihilators)),
                              tuple(reversed(self.creators)))

    def support(self) -> np.ndarray:
        """Mode indices where any vector is nonzero."""
        stack = np.stack(self.creators + self.annihilators)
        return np.nonzero(np.any(np.abs(stack) > 0, axis=0))[0]

    def projected(self, indices) -> "OperatorString":
        idx = np.asarray(indices, dtype=int)
        return OperatorString(tuple(f[idx] for f in self.creators),
                              tuple(g[idx] for g in self.annihilators))


def wick_expectation(kernel: TwoPointKernel, string: OperatorString) -> complex:
    """det{ K(f_i, g_j) } for n = m, zero otherwise.

    Rows run over creation vectors, columns over annihilation vectors; the
    1x1 reduction fixes the convention.  The determinant is evaluated by an
    LU factorization with partial pivoting (numpy), stable up to n = 64.
    """
    n = len(string.creators)
    m = len(string.annihilators)
    if n != m:
        return 0.0 + 0.0j
    if n == 0:
        return 1.0 + 0.0j
    mat = np.empty((n, n), dtype=complex)
    for i, f in enumerate(string.creators):
        for j, g in enumerate(string.annihilators):
            mat[i, j] = kernel.evaluate(f, g)
    return complex(np.linalg.det(mat))


def _jw_annihilators(n_modes: int) -> list[np.ndarray]:
    """Jordan-Wigner annihilation matrices on the 2^n Fock space."""
    sz = np.array([[1.0, 0.0], [0.0, -1.0]])
    low = np.array([[0.0, 1.0], [0.0, 0.0]])  # <0|a|1> = 1
    eye = np.eye(2)
    ops = []
    for j in range(n_modes):
        mats = [sz] * j + [low] + [eye] * (n_modes - j - 1)
        full = mats[0]
        for m in mats[1:]:
            full = np.kron(full, m)
        ops.append(full)
    return ops


def fock_oracle_expectation(h, beta, mu, string: OperatorString) -> complex:
    """Brute-force thermal expectation on the full Fock space (<= 8 modes).

    h is the Hermitian mode matrix (or a 1-D array of mode energies); beta/mu
    may be scalars, or per-mode arrays when h is diagonal (independent
    subsystems in distinct equilibria).  Returns Tr(rho Op)/Tr(rho) with
    rho = exp(-sum_j beta_j (H_j - mu_j N_j)) assembled by exact
    exponentiation of the second-quantized quadratic form.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim == 1:
        h = np.diag(h)
    n_modes = h.shape[0]
    if n_modes > _FOCK_CAP:
        raise TooManyModes(f"{n_modes} modes exceed the Fock cap {_FOCK_CAP}; "
                           "project the string onto its support first")
    beta_arr = np.broadcast_to(np.asarray(beta, dtype=float), (n_modes,))
    mu_arr = np.broadcast_to(np.asarray(mu, dtype=float), (n_modes,))
    scalar_thermo = np.all(beta_arr == beta_arr[0]) and np.all(mu_arr == mu_arr[0])
    if not scalar_thermo and np.any(h != np.diag(np.diag(h))):
        raise ValueError("per-mode thermodynamics requires a diagonal mode matrix")

    ann = _jw_annihilators(n_modes)
    cre = [a.conj().T for a in ann]
    # K = sum_ij beta_i (h_ij - mu_i delta_ij) a_i^+ a_j  (Hermitian by the
    # diagonal restriction in the per-mode case)
    kmat = beta_arr[:, None] * (h - np.diag(mu_arr))
    dim = 2 ** n_modes
    kop = np.zeros((dim, dim), dtype=complex)
    for i in range(n_modes):
        for j in range(n_modes):
            if kmat[i, j] != 0.0:
                kop += kmat[i, j] * (cre[i] @ ann[j])
    evals, evecs = np.linalg.eigh(kop)
    rho = (evecs * np.exp(-evals)) @ evecs.conj().T

    op = np.eye(dim, dtype=complex)
    for f in string.creators:
        if f.size != n_modes:
            raise GridMismatch("string vectors do not match the mode matrix")
        a_f_dag = sum(fj * cre[j] for j, fj in enumerate(f))
        op = op @ a_f_dag
    for g in reversed(string.annihilators):
        a_g = sum(np.conj(gj) * ann[j] for j, gj in enumerate(g))
        op = op @ a_g
    return complex(np.trace(rho @ op) / np.trace(rho))


def kms_check_matrix(hmat, beta: float, a, b) -> float:
    """Thermal-identity residual |Tr(rho A e^{-bH} B e^{bH}) - Tr(rho B A)| / (||A|| ||B||).

    Vanishes for the Gibbs state rho = e^{-bH}/Z; nonzero for any other state,
    which is what makes it a usable equilibrium certificate.
    """
    hmat = np.asarray(hmat, dtype=complex)
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if hmat.shape[0] > 64:
        raise ValueError("matrix check capped at d = 64")
    evals, evecs = np.linalg.eigh(hmat)
    down = (evecs * np.exp(-beta * evals)) @ evecs.conj().T   # e^{-beta H}
    up = (evecs * np.exp(beta * evals)) @ evecs.conj().T      # e^{+beta H}
    rho = down / np.trace(down)
    lhs = np.trace(rho @ a @ down @ b @ up)
    rhs = np.trace(rho @ b @ a)
    norm_a = np.linalg.norm(a, 2)
    norm_b = np.linalg.norm(b, 2)
    return float(abs(lhs - rhs) / (norm_a * norm_b))


def gibbs_state(hmat, beta: float) -> np.ndarray:
    """rho = e^{-beta H} / Z."""
    hmat = np.asarray(hmat, dtype=complex)
    evals, evecs = np.linalg.eigh(hmat)
    down = (evecs * np.exp(-beta * evals)) @ evecs.conj().T
    return down / np.trace(down)


def kms_residual_for_state(rho, hmat, beta: float, a, b) -> float:
    """Same residual as kms_check_matrix but for an arbitrary state rho."""
    hmat = np.asarray(hmat, dtype=complex)
    evals, evecs = np.linalg.eigh(hmat)
    down = (evecs * np.exp(-beta * evals)) @ evecs.conj().T
    up = (evecs * np.exp(beta * evals)) @ evecs.conj().T
    lhs = np.trace(rho @ a @ down @ b @ up)
    rhs = np.trace(rho @ b @ a)
    return float(abs(lhs - rhs) / (np.linalg.norm(a, 2) * np.linalg.norm(b, 2)))


def _filon_fourier(x: np.ndarray, p: np.ndarray, t: float) -> complex:
    """int p(x) e^{i t x} dx on a uniform grid with an odd number of points.

    Classical Filon weights: exact for quadratics times the oscillation, with
    stable Taylor fallbacks for small t*h.
    """
    n = x.size
    if n < 3 or n % 2 == 0:
        raise ValueError("Filon needs an odd number of points >= 3")
    h = x[1] - x[0]
    theta = t * h
    if abs(theta) < 1e-3:
        s = theta * theta
        alpha = 2.0 * theta ** 3 / 45.0 - 2.0 * theta ** 5 / 315.0
        beta = 2.0 / 3.0 + 2.0 * s / 15.0 - 4.0 * s * s / 105.0
        gamma = 4.0 / 3.0 - 2.0 * s / 15.0 + s * s / 210.0
    else:
        sin_t, cos_t = math.sin(theta), math.cos(theta)
        alpha = (theta ** 2 + theta * sin_t * cos_t - 2.0 * sin_t ** 2) / theta ** 3
        beta = 2.0 * (theta * (1.0 + cos_t ** 2) - 2.0 * sin_t * cos_t) / theta ** 3
        gamma = 4.0 * (sin_t - theta * cos_t) / theta ** 3
    phase = np.exp(1j * t * x)
    even = p[0::2] * phase[0::2]
    odd = p[1::2] * phase[1::2]
    s_even = np.sum(even) - 0.5 * (even[0] + even[-1])
    s_odd = np.sum(odd)
    boundary = 1j * alpha * (p[-1] * phase[-1] - p[0] * phase[0])
    return complex(h * (boundary + beta * s_even + gamma * s_odd))


def commutator_decay(f, g, dispersion, mu: float, t: float, kgrid,
                     weights=None) -> float:
    """Norm of the commutator of two quadratic observables at time separation t:
    2 |int f(k) conj(g(k)) e^{i (w_k - mu) t} dk| * ||f|| * ||g||.

    Plain quadrature for small |t| * bandwidth; Filon-type oscillatory
    quadrature on the energy axis beyond |t| * bandwidth = 50 (requires a
    monotone dispersion, which the channel contract already guarantees).
    """
    kgrid = np.asarray(kgrid, dtype=float)
    f = np.asarray(f, dtype=complex)
    g = np.asarray(g, dtype=complex)
    if not (f.size == g.size == kgrid.size):
        raise GridMismatch("f, g, kgrid must align")
    if weights is None:
        weights = np.gradient(kgrid)
    weights = np.asarray(weights, dtype=float)
    energies = np.asarray(dispersion(kgrid), dtype=float)
    norm_f = math.sqrt(float(np.sum(weights * np.abs(f) ** 2)))
    norm_g = math.sqrt(float(np.sum(weights * np.abs(g) ** 2)))
    span = float(energies.max() - energies.min())
    product = f * np.conj(g) * weights

    if abs(t) * span <= 50.0:
        overlap = np.sum(product * np.exp(1j * (energies - mu) * t))
    else:
        order = np.argsort(energies)
        e_sorted = energies[order]
        # product carries the k-measure per node; dividing by the local energy
        # spacing turns it into a density in the energy variable
        de = np.maximum(np.abs(np.gradient(energies)), 1e-300)
        dens = (product / de)[order]
        n_uniform = max(513, 2 * e_sorted.size + 1)
        if n_uniform % 2 == 0:
            n_uniform += 1
        e_uni = np.linspace(e_sorted[0], e_sorted[-1], n_uniform)
        dens_uni = (np.interp(e_uni, e_sorted, dens.real)
                    + 1j * np.interp(e_uni, e_sorted, dens.imag))
        overlap = _filon_fourier(e_uni, dens_uni, t) * np.exp(-1j * mu * t)
    return float(2.0 * abs(overlap) * norm_f * norm_g)
