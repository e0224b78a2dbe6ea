"""Randomized verification suites behind `verify --suite {...}`.

Each suite draws its cases from a root seed, runs the library route against an
exact oracle, and returns a JSON-able summary with the max residual and a pass
flag.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import expm

from . import algebra, dyson, quasifree


def _hermitian(rng: np.random.Generator, d: int, scale: float = 1.0) -> np.ndarray:
    m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = 0.5 * (m + m.conj().T)
    return scale * h / max(np.linalg.norm(h, 2), 1e-12)


def run_wick_suite(seed: int = 0, cases: int = 200) -> dict:
    """Determinant moments vs the exact Fock trace: n = m <= 3 on <= 6 modes."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        n_modes = int(rng.integers(2, 7))
        order = int(rng.integers(1, 4))
        energies = rng.uniform(-2.0, 2.0, n_modes)
        beta = float(rng.uniform(0.3, 3.0))
        mu = float(rng.uniform(-1.0, 1.0))
        draw = lambda: rng.standard_normal(n_modes) + 1j * rng.standard_normal(n_modes)
        string = quasifree.OperatorString(
            tuple(draw() for _ in range(order)),
            tuple(draw() for _ in range(order)))
        kernel = quasifree.TwoPointKernel.thermal(energies, beta, mu)
        got = quasifree.wick_expectation(kernel, string)
        want = quasifree.fock_oracle_expectation(energies, beta, mu, string)
        worst = max(worst, abs(got - want))
    return {"suite": "wick", "cases": cases, "seed": seed,
            "max_residual": worst, "tolerance": 1e-9, "pass": bool(worst <= 1e-9)}


def run_kms_suite(seed: int = 0, cases: int = 100) -> dict:
    """Gibbs thermal-identity residuals plus the detuned-state counterexample power."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    detuned_hits = 0
    for _ in range(cases):
        d = 8
        h = _hermitian(rng, d, scale=2.0)
        a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        b = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        beta = float(rng.uniform(0.5, 1.5))
        worst = max(worst, quasifree.kms_check_matrix(h, beta, a, b))
        rho_wrong = quasifree.gibbs_state(h, 1.3 * beta)
        if quasifree.kms_residual_for_state(rho_wrong, h, beta, a, b) > 1e-3:
            detuned_hits += 1
    power = detuned_hits / cases
    ok = worst <= 1e-10 and power >= 0.95
    return {"suite": "kms", "cases": cases, "seed": seed,
            "max_residual": worst, "tolerance": 1e-10,
            "counterexample_power": power, "pass": bool(ok)}


def run_decay_suite(seed: int = 0) -> dict:
    """Gaussian-overlap commutator decay vs the closed-form Fourier transform."""
    rng = np.random.default_rng(seed)
    ks = np.linspace(-12.0, 12.0, 2001)
    width = float(rng.uniform(0.8, 1.5))
    slope = float(rng.uniform(0.7, 1.3))
    offset = float(rng.uniform(-0.5, 0.5))
    mu = float(rng.uniform(-0.4, 0.4))
    f = np.exp(-ks ** 2 / (4.0 * width ** 2)).astype(complex)
    dispersion = lambda k: slope * k + offset
    gauss_mass = math.sqrt(2.0 * math.pi) * width  # int |f|^2 dk

    def analytic(t: float) -> float:
        # overlap integral is a Gaussian in t; the norms contribute the mass again
        overlap = gauss_mass * math.exp(-0.5 * width ** 2 * slope ** 2 * t ** 2)
        return 2.0 * overlap * gauss_mass

    worst = 0.0
    for t in (0.0, 0.5, 1.0, 2.0, 3.0):
        got = quasifree.commutator_decay(f, f, dispersion, mu, t, ks)
        want = analytic(t)
        worst = max(worst, abs(got - want) / max(abs(want), 1e-30))
    v0 = quasifree.commutator_decay(f, f, dispersion, mu, 0.0, ks)
    t_far = 10.0 / (width * slope)  # deep in the oscillatory-quadrature regime
    v_far = quasifree.commutator_decay(f, f, dispersion, mu, t_far, ks)
    decayed = v_far < 1e-3 * v0
    ok = worst <= 1e-6 and decayed
    return {"suite": "decay", "seed": seed, "max_residual": worst,
            "tolerance": 1e-6, "far_time_ratio": v_far / v0,
            "pass": bool(ok)}


def _hermitian_gapped(rng: np.random.Generator, d: int) -> np.ndarray:
    """Hermitian with |eigenvalues| in [0.25, 1]: keeps the series routes fast."""
    q, _ = np.linalg.qr(rng.standard_normal((d, d))
                        + 1j * rng.standard_normal((d, d)))
    evals = rng.uniform(0.25, 1.0, d) * rng.choice([-1.0, 1.0], d)
    return (q * evals) @ q.conj().T


def run_spectral_suite(seed: int = 0, cases: int = 40) -> dict:
    """Radius/sqrt/decomposition/Cayley identities against eigensolver oracles."""
    rng = np.random.default_rng(seed)
    worst = {"radius": 0.0, "sqrt": 0.0, "ortho": 0.0, "cayley": 0.0,
             "cstar": 0.0}
    dims = [int(rng.integers(4, 17)) for _ in range(cases)]
    dims[0] = 64  # exercise the top of the contracted size range
    for d in dims:
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        rad = algebra.spectral_radius_gelfand(algebra.MatElement.wrap(g), 1 << 28)
        rad_true = float(np.max(np.abs(np.linalg.eigvals(g))))
        worst["radius"] = max(worst["radius"],
                              abs(rad - rad_true) / max(rad_true, 1e-12))
        # C* identity ||A^+ A|| = ||A||^2
        a_el = algebra.MatElement.wrap(g)
        cstar = abs(algebra.operator_norm(g.conj().T @ g) - a_el.norm ** 2)
        worst["cstar"] = max(worst["cstar"], cstar / max(a_el.norm ** 2, 1e-12))

        h = _hermitian_gapped(rng, d)
        psd = h @ h.conj().T + 0.1 * np.eye(d)
        root = algebra.positive_sqrt_series(algebra.MatElement.wrap(psd))
        evals, evecs = np.linalg.eigh(psd)
        root_eig = (evecs * np.sqrt(evals)) @ evecs.conj().T
        worst["sqrt"] = max(worst["sqrt"],
                            float(np.linalg.norm(root.matrix - root_eig, 2)))

        a_plus, a_minus = algebra.orthogonal_decomposition(
            algebra.MatElement.wrap(h))
        cross = algebra.operator_norm(a_plus.matrix @ a_minus.matrix)
        worst["ortho"] = max(worst["ortho"],
                             cross / max(algebra.operator_norm(h) ** 2, 1e-12))

        k = algebra.cayley_transform(algebra.MatElement.wrap(h))
        unit = algebra.operator_norm(
            k.matrix.conj().T @ k.matrix - np.eye(d))
        worst["cayley"] = max(worst["cayley"], unit)
    ok = (worst["radius"] <= 1e-6 and worst["sqrt"] <= 1e-8
          and worst["ortho"] <= 1e-8 and worst["cayley"] <= 1e-10
          and worst["cstar"] <= 1e-12)
    return {"suite": "spectral", "cases": cases, "seed": seed,
            "max_residuals": worst, "pass": bool(ok)}


def run_dyson_suite(seed: int = 0, cases: int = 20) -> dict:
    """Series propagator vs the closed form e^{iHt} e^{-iH0 t}."""
    rng = np.random.default_rng(seed)
    worst = {"oracle": 0.0, "unitary": 0.0, "cocycle": 0.0}
    for _ in range(cases):
        d = 6
        h0 = _hermitian(rng, d, scale=float(rng.uniform(0.5, 2.0)))
        v = _hermitian(rng, d, scale=1.0)
        t = float(rng.uniform(0.2, 2.0))  # ||V|| = 1 so ||V|| t <= 2
        prop = dyson.dyson_gamma(h0, v, t, tol=1e-12)
        gamma = prop.value
        oracle = expm(1j * (h0 + v) * t) @ expm(-1j * h0 * t)
        worst["oracle"] = max(worst["oracle"],
                              float(np.linalg.norm(gamma - oracle, 2)))
        worst["unitary"] = max(worst["unitary"], float(np.linalg.norm(
            gamma.conj().T @ gamma - np.eye(d), 2)))
        s = float(rng.uniform(0.1, 1.0))
        g_s = dyson.dyson_gamma(h0, v, s, tol=1e-12).value
        g_ts = dyson.dyson_gamma(h0, v, t + s, tol=1e-12).value
        comp = gamma @ dyson.free_evolution(h0, t, g_s)
        worst["cocycle"] = max(worst["cocycle"],
                               float(np.linalg.norm(g_ts - comp, 2)))
    ok = (worst["oracle"] <= 1e-8 and worst["unitary"] <= 1e-9
          and worst["cocycle"] <= 1e-8)
    return {"suite": "dyson", "cases": cases, "seed": seed,
            "max_residuals": worst, "pass": bool(ok)}


SUITES = {
    "wick": run_wick_suite,
    "kms": run_kms_suite,
    "decay": run_decay_suite,
    "spectral": run_spectral_suite,
    "dyson": run_dyson_suite,
}
