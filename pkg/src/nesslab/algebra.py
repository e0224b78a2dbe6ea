"""Operator calculus on finite matrices: norm, spectral radius by repeated
squaring, resolvent Neumann series, positive square root by the binomial
series, orthogonal decomposition, and the Cayley transform.

Every construction here is series- or identity-based; eigendecompositions are
reserved for the test oracles.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPositive, OutsideDisk, Overflow, SlowConvergence

_SQRT_BUDGET = 100_000


@dataclass(frozen=True)
class MatElement:
    """Square complex matrix with its operator norm cached at construction."""

    matrix: np.ndarray
    norm: float

    @classmethod
    def wrap(cls, matrix) -> "MatElement":
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("need a square matrix")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix entries must be finite")
        m.setflags(write=False)
        return cls(m, operator_norm(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        scale = max(self.norm, 1e-300)
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol * scale)


def operator_norm(matrix: np.ndarray) -> float:
    """Largest singular value (exact for the Gelfand monotonicity tests)."""
    return float(np.linalg.norm(matrix, 2))


def _as_element(a) -> MatElement:
    return a if isinstance(a, MatElement) else MatElement.wrap(a)


def spectral_radius_gelfand(a, n_terms: int) -> float:
    """||A^(2^j)||^(1/2^j) at the largest 2^j <= n_terms, by repeated squaring.

    Powers are renormalized at every squaring so only logarithms of norms are
    accumulated; a vanishing power means a nilpotent element (radius zero).
    """
    a = _as_element(a)
    if n_terms < 4:
        raise ValueError("need n_terms >= 4")
    j_max = int(np.floor(np.log2(n_terms)))
    b = a.matrix
    log_norm_power = 0.0  # log ||A^(2^j)|| accumulated through rescaling
    for _ in range(j_max):
        norm_b = operator_norm(b)
        if not np.isfinite(norm_b):
            raise Overflow("norm rescaling produced a non-finite value")
        if norm_b == 0.0:
            return 0.0
        log_norm_power = 2.0 * (log_norm_power + np.log(norm_b))
        b = (b / norm_b) @ (b / norm_b)
    norm_b = operator_norm(b)
    if not np.isfinite(norm_b):
        raise Overflow("norm rescaling produced a non-finite value")
    if norm_b == 0.0:
        return 0.0
    log_total = log_norm_power + np.log(norm_b)
    return float(np.exp(log_total / 2.0 ** j_max))


def gelfand_sequence(a, j_max: int) -> list[float]:
    """The non-increasing sequence ||A^(2^j)||^(1/2^j), j = 0..j_max."""
    a = _as_element(a)
    out = [a.norm]
    b = a.matrix
    log_norm_power = 0.0
    for j in range(1, j_max + 1):
        norm_b = operator_norm(b)
        if norm_b == 0.0:
            out.extend([0.0] * (j_max - j + 1))
            return out
        log_norm_power = 2.0 * (log_norm_power + np.log(norm_b))
        b = (b / norm_b) @ (b / norm_b)
        total = log_norm_power + np.log(max(operator_norm(b), 1e-300))
        out.append(float(np.exp(total / 2.0 ** j)))
    return out


def resolvent_series(a, lam: complex, tol: float = 1e-12) -> MatElement:
    """(lam - A)^{-1} by the Neumann series, valid only for |lam| > ||A||.

    Terms are summed until the geometric tail is below tol times the
    accumulated norm; the result R satisfies ||(lam - A) R - 1|| <= 10 tol.
    """
    a = _as_element(a)
    lam = complex(lam)
    if abs(lam) <= a.norm:
        raise OutsideDisk(f"|lambda| = {abs(lam)} inside the norm disk {a.norm}")
    ratio = a.norm / abs(lam)
    step = a.matrix / lam
    term = np.eye(a.dim, dtype=complex) / lam
    total = term.copy()
    # geometric tail bound ||term|| * ratio / (1 - ratio)
    for _ in range(100_000):
        term = term @ step
        total += term
        tail = operator_norm(term) * ratio / (1.0 - ratio)
        if tail < tol * max(operator_norm(total), 1e-300):
            return MatElement.wrap(total)
    raise SlowConvergence("resolvent series exhausted its term budget")


def positive_sqrt_series(a) -> MatElement:
    """Unique positive square root via B = sqrt(||A||) (1 + sum c_n C^n),
    C = 1 - A/||A||.

    Detects the idempotent fixed point C^2 = C (projectors) and closes the
    scalar tail analytically; genuinely near-singular input exhausts the term
    budget and raises SlowConvergence (eigen route is the fallback).
    """
    a = _as_element(a)
    if not a.is_hermitian():
        raise NotPositive("matrix is not Hermitian")
    if a.norm == 0.0:
        return MatElement.wrap(np.zeros_like(a.matrix))
    min_eig = float(np.linalg.eigvalsh(a.matrix).min())
    if min_eig < -1e-12 * a.norm:
        raise NotPositive(f"minimum eigenvalue {min_eig} is negative")
    dim = a.dim
    c_mat = np.eye(dim, dtype=complex) - a.matrix / a.norm
    scale = np.sqrt(a.norm)
    tol = 1e-14 * scale * dim

    total = np.eye(dim, dtype=complex)
    power = np.eye(dim, dtype=complex)
    coeff = 1.0
    partial_coeff = 0.0  # sum of c_k so far
    n = 0
    while n < _SQRT_BUDGET:
        n += 1
        coeff = -0.5 if n == 1 else coeff * (2.0 * (n - 1) - 1.0) / (2.0 * (n - 1) + 2.0)
        new_power = power @ c_mat
        if n > 1 and operator_norm(new_power - power) <= 1e-14 * max(
                operator_norm(power), 1e-300):
            # C^n stalled: remaining series sums to (sqrt(1-x)-1 - sum c_k x^k)
            # at x = 1, i.e. -1 - partial_coeff, applied to the fixed power
            total += (-1.0 - partial_coeff) * new_power
            return MatElement.wrap(scale * total)
        power = new_power
        term = coeff * power
        total += term
        partial_coeff += coeff
        if scale * operator_norm(term) < tol:
            return MatElement.wrap(scale * total)
    raise SlowConvergence(
        f"square-root series did not settle within {_SQRT_BUDGET} terms")


def orthogonal_decomposition(a):
    """(A_plus, A_minus): positive parts with A = A_+ - A_- and A_+ A_- = 0.

    |A| is the series square root of A^2; A_pm = (|A| pm A)/2.
    """
    a = _as_element(a)
    if not a.is_hermitian():
        raise NotPositive("orthogonal decomposition needs a Hermitian matrix")
    modulus = positive_sqrt_series(MatElement.wrap(a.matrix @ a.matrix))
    plus = 0.5 * (modulus.matrix + a.matrix)
    minus = 0.5 * (modulus.matrix - a.matrix)
    return MatElement.wrap(plus), MatElement.wrap(minus)


def cayley_transform(a) -> MatElement:
    """K = (i alpha - A)^{-1} (i alpha + A) with alpha = 2 ||A||: unitary for
    Hermitian A, and A = i alpha (K - 1)(K + 1)^{-1} inverts it."""
    a = _as_element(a)
    if not a.is_hermitian():
        raise NotPositive("Cayley transform needs a Hermitian matrix")
    if a.norm == 0.0:
        raise ValueError("Cayley transform needs a nonzero matrix")
    alpha = 2.0 * a.norm
    eye = np.eye(a.dim, dtype=complex)
    k = np.linalg.solve(1j * alpha * eye - a.matrix, 1j * alpha * eye + a.matrix)
    return MatElement.wrap(k)


def inverse_cayley(k, alpha: float) -> MatElement:
    """Recover A = i alpha (K - 1)(K + 1)^{-1} from a Cayley transform."""
    k = _as_element(k)
    eye = np.eye(k.dim, dtype=complex)
    sol = np.linalg.solve((k.matrix + eye).T, (k.matrix - eye).T).T
    return MatElement.wrap(1j * alpha * sol)
