"""Brute-force lattice ground truth: discretize both reservoirs into finite
mode sets, evolve the one-particle correlation matrix exactly, and read the
current off its plateau before the Poincare recurrence.

Index layout of the single-particle matrix h: system levels first, then the
left modes, then the right modes.  Couplings scale as u(k_j) sqrt(W_j) so the
continuum model is recovered as the mode count grows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RecurrenceRisk
from .model import (ReservoirChannel, SystemSpec, ThermoState, fermi_factor,
                    uniform_energy_modes)


@dataclass
class LatticeModel:
    """Finite single-particle realization of system + two discretized reservoirs."""

    h: np.ndarray
    n_sys: int
    energies_l: np.ndarray
    energies_r: np.ndarray
    weights_l: np.ndarray
    weights_r: np.ndarray
    u_l: np.ndarray
    u_r: np.ndarray
    w_l_sys: np.ndarray
    w_r_sys: np.ndarray
    _eig: tuple | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.h.shape[0]

    @property
    def m_l(self) -> int:
        return self.energies_l.size

    @property
    def m_r(self) -> int:
        return self.energies_r.size

    @property
    def sys_slice(self) -> slice:
        return slice(0, self.n_sys)

    @property
    def left_slice(self) -> slice:
        return slice(self.n_sys, self.n_sys + self.m_l)

    @property
    def right_slice(self) -> slice:
        return slice(self.n_sys + self.m_l, self.dim)

    def eig(self):
        if self._eig is None:
            evals, evecs = np.linalg.eigh(self.h)
            self._eig = (evals, evecs)
        return self._eig

    def level_spacing(self) -> float:
        """Largest reservoir level spacing (sets the recurrence time 2 pi / dw)."""
        gaps = []
        for e in (self.energies_l, self.energies_r):
            if e.size > 1:
                gaps.append(float(np.max(np.diff(e))))
        return max(gaps) if gaps else math.inf


@dataclass
class CorrelationMatrix:
    """C_ij = <c_i^+ c_j>: Hermitian, eigenvalues in [0, 1], trace = particle number."""

    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def occupation_bounds(self) -> tuple[float, float]:
        evals = np.linalg.eigvalsh(self.matrix)
        return float(evals.min()), float(evals.max())


def discretize(sys: SystemSpec, res_l: ReservoirChannel, res_r: ReservoirChannel,
               m: int) -> LatticeModel:
    """Uniform-energy discretization with sqrt-weight coupling normalization."""
    e_l, k_l, w_l = uniform_energy_modes(res_l, m)
    e_r, k_r, w_r = uniform_energy_modes(res_r, m)
    u_l = np.asarray(res_l.coupling(k_l), dtype=complex)
    u_r = np.asarray(res_r.coupling(k_r), dtype=complex)
    n = sys.size
    dim = n + 2 * m
    h = np.zeros((dim, dim), dtype=complex)
    h[:n, :n] = np.diag(sys.levels)
    sl_l = slice(n, n + m)
    sl_r = slice(n + m, dim)
    h[sl_l, sl_l] = np.diag(e_l)
    h[sl_r, sl_r] = np.diag(e_r)
    # V = sum u w a^+ f + h.c.  =>  h[a_j, f_lam] = u_j sqrt(W_j) w_lam
    block_l = np.outer(u_l * np.sqrt(w_l), sys.coupling_l)
    block_r = np.outer(u_r * np.sqrt(w_r), sys.coupling_r)
    h[sl_l, :n] = block_l
    h[:n, sl_l] = block_l.conj().T
    h[sl_r, :n] = block_r
    h[:n, sl_r] = block_r.conj().T
    return LatticeModel(h, n, e_l, e_r, w_l, w_r, u_l, u_r,
                        sys.coupling_l.copy(), sys.coupling_r.copy())


def initial_correlation(model: LatticeModel, th: ThermoState,
                        system_fill) -> CorrelationMatrix:
    """Product state: reservoirs in their own equilibria, system at given fillings."""
    fill = np.broadcast_to(np.asarray(system_fill, dtype=float), (model.n_sys,))
    if np.any(fill < 0) or np.any(fill > 1):
        raise ValueError("system occupations must lie in [0, 1]")
    occ_l = fermi_factor(th.beta_l, th.mu_l, model.energies_l)
    occ_r = fermi_factor(th.beta_r, th.mu_r, model.energies_r)
    diag = np.concatenate([fill, np.atleast_1d(occ_l), np.atleast_1d(occ_r)])
    return CorrelationMatrix(np.diag(diag.astype(complex)))


def evolve_correlation(model: LatticeModel, c0: CorrelationMatrix,
                       t: float) -> CorrelationMatrix:
    """Exact quadratic-dynamics propagation C(t) = U* C(0) U^T, U = e^{-i h t}.

    The index convention (C_ij = <c_i^+ c_j> evolving with the conjugated
    propagator) is pinned by the two-site Fock-space cross-check in the tests.
    """
    evals, evecs = model.eig()
    p = evecs.conj()
    inner = p.conj().T @ c0.matrix @ p
    phase = np.exp(1j * evals * t)
    ct = p @ (phase[:, None] * inner * np.conj(phase)[None, :]) @ p.conj().T
    return CorrelationMatrix(ct)


def lattice_current(model: LatticeModel, c: CorrelationMatrix) -> float:
    """Growth rate of the left-reservoir particle number:
    2 Im sum_{j,lam} u_j sqrt(W_j) w_lam C[a_j, f_lam]."""
    block = c.matrix[model.left_slice, model.sys_slice]
    coup = np.outer(model.u_l * np.sqrt(model.weights_l), model.w_l_sys)
    return float(2.0 * np.imag(np.sum(coup * block)))


def plateau_current(model: LatticeModel, c0: CorrelationMatrix, t_max: float,
                    window: float = 0.2, samples: int = 25):
    """(mean, spread) of the current over the window [t_max (1 - window), t_max].

    Raises RecurrenceRisk when t_max exceeds half the recurrence time
    2 pi / (reservoir level spacing).  Uses one eigendecomposition and
    reconstructs only the (left, system) block per sample.
    """
    spacing = model.level_spacing()
    if math.isfinite(spacing) and t_max > 0.5 * (2.0 * math.pi / spacing):
        raise RecurrenceRisk(
            f"t_max={t_max} beyond half the recurrence time {2 * math.pi / spacing:.1f}")
    evals, evecs = model.eig()
    p = evecs.conj()
    inner = p.conj().T @ c0.matrix @ p
    rows = p[model.left_slice]
    cols = p[model.sys_slice]
    coup = np.outer(model.u_l * np.sqrt(model.weights_l), model.w_l_sys)
    times = np.linspace(t_max * (1.0 - window), t_max, samples)
    vals = np.empty(samples)
    for i, t in enumerate(times):
        phase = np.exp(1j * evals * t)
        mixed = (phase[:, None] * inner * np.conj(phase)[None, :]) @ cols.conj().T
        block = rows @ mixed
        vals[i] = 2.0 * np.imag(np.sum(coup * block))
    mean = float(np.mean(vals))
    spread = float(np.max(np.abs(vals - mean)))
    return mean, spread


def incoming_mode_occupation(model: LatticeModel, c: CorrelationMatrix, field_obj,
                             node_indices) -> np.ndarray:
    """Occupations of discretized incoming modes: sandwich C with the
    weight-normalized alpha coefficient vectors.

    The lattice mode a_j stands for the cell average of the continuum mode, so
    the normalized field sqrt(W_k) alpha_k has lattice coefficients
    delta_kj + sqrt(W_k W_j) m[k,j] on the left modes, sqrt(W_k W_j) n[k,j] on
    the right modes, and sqrt(W_k) h[k,lam] on the system.  At plateau times
    the sandwich approaches the left Fermi factor at the node energy.
    """
    if field_obj.grid_l.energies.size != model.m_l or \
            field_obj.grid_r.energies.size != model.m_r:
        raise ValueError("field and lattice must share the mode grids")
    out = []
    wl = field_obj.grid_l.weights
    wr = field_obj.grid_r.weights
    for k in np.atleast_1d(node_indices):
        root_w = math.sqrt(wl[k])
        vec = np.zeros(model.dim, dtype=complex)
        vec[model.sys_slice] = root_w * field_obj.h[k]
        left = root_w * np.sqrt(wl) * field_obj.m[k]
        left[k] += 1.0
        vec[model.left_slice] = left
        vec[model.right_slice] = root_w * np.sqrt(wr) * field_obj.n[k]
        out.append(float(np.real(np.vdot(vec, c.matrix @ vec))))
    return np.array(out)
