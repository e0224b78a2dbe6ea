"""Incoming-field coefficients, eigenoperator residuals, and the nine
completeness residuals that certify a unique steady state.

The field operators are expanded over the bare modes with kernels carrying a
-i*delta regularization of the -i0 denominators; delta is tied to the grid so
the smeared kernels are resolved (default delta = 4 * energy spacing).

Residual conventions (see module notes in the README):
  * the six pair conditions are reported as max-norms over node pairs outside
    the regularization window |w - w'| <= 8*delta, where the finite-delta
    kernels are definitionally non-sharp (linear and quadratic terms carry
    Lorentzians of width delta and 2*delta whose masses, not point values,
    cancel in the continuum);
  * the two level conditions and the orthonormality condition are plain
    pointwise max-norms;
  * eigenoperator a/b residuals integrate the defect over the mode index
    (weights included) before taking the max over field nodes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import BoundState
from .model import (ReservoirChannel, SystemSpec, ThermoState, band_union,
                    fermi_factor, uniform_energy_modes)
from .selfenergy import boundary_or_exterior, exterior_value
from .sfunc import coupled_matrix, resolvent_columns
from .transport import fermi

_WINDOW_FACTOR = 8.0


@dataclass(frozen=True)
class ReservoirGrid:
    """Uniform-in-energy mode grid for one reservoir (k-measure weights)."""

    energies: np.ndarray
    ks: np.ndarray
    weights: np.ndarray
    u: np.ndarray  # coupling amplitude at each node

    @classmethod
    def build(cls, channel: ReservoirChannel, m: int) -> "ReservoirGrid":
        energies, ks, weights = uniform_energy_modes(channel, m)
        u = np.asarray(channel.coupling(ks), dtype=complex)
        return cls(energies, ks, weights, u)

    @property
    def spacing(self) -> float:
        return float(self.energies[1] - self.energies[0])


@dataclass(frozen=True)
class IncomingField:
    """Grid-sampled coefficient functions of the incoming eigenoperator family.

    The alpha family lives on the left grid (index k), the beta family on the
    right grid; h/hbar are the system components, (m, n, mbar, nbar) the mode
    kernels sampled on grid products, and (a_l, a_r, abar_l, abar_r) the
    amplitude functions entering the kernels.
    """

    sys: SystemSpec
    grid_l: ReservoirGrid
    grid_r: ReservoirGrid
    delta: float
    a_l: np.ndarray
    a_r: np.ndarray
    abar_l: np.ndarray
    abar_r: np.ndarray
    h: np.ndarray
    hbar: np.ndarray
    m: np.ndarray
    n: np.ndarray
    mbar: np.ndarray
    nbar: np.ndarray
    xi_l: np.ndarray   # xi_-(w_k) on the left grid
    eta_l: np.ndarray  # eta at left-grid energies
    xi_r: np.ndarray   # xi at right-grid energies
    eta_r: np.ndarray
    lam_l: np.ndarray  # Lambda_- at left-grid energies
    lam_r: np.ndarray


@dataclass(frozen=True)
class ResidualReport:
    """Max-norms of the nine completeness conditions plus the three
    anticommutator relations (which reduce to conditions 4, 2, 6)."""

    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float
    c7: float
    c8: float
    c9: float
    anti1: float
    anti2: float
    anti3: float

    def as_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in
                ("c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8", "c9",
                 "anti1", "anti2", "anti3")}

    def max_condition(self) -> float:
        return max(self.c1, self.c2, self.c3, self.c4, self.c5, self.c6,
                   self.c7, self.c8, self.c9)


def _lambda_det(sys: SystemSpec, xi: complex, eta: complex, z: complex) -> complex:
    """Lambda via det(M)/prod(z - e): finite wherever the solve route is."""
    m = coupled_matrix(sys, xi, eta, z)
    det = np.linalg.det(m)
    base = np.prod(z - sys.levels.astype(complex))
    if base == 0.0:
        return complex(np.inf)
    return complex(det / base)


def incoming_coefficients(sys: SystemSpec, res_l: ReservoirChannel,
                          res_r: ReservoirChannel, modes: int,
                          delta: float | None = None,
                          branch: int = -1) -> IncomingField:
    """Fill all coefficient arrays of the incoming field on uniform-energy grids.

    branch=-1 selects the physical -i*delta kernels (the choice for which the
    reconstruction defect dies out toward the far past); +1 builds the wrong
    branch for diagnostics.  Raises BoundState when |Lambda| < 1e-10 at a node.
    """
    grid_l = ReservoirGrid.build(res_l, modes)
    grid_r = ReservoirGrid.build(res_r, modes)
    if delta is None:
        delta = 4.0 * max(grid_l.spacing, grid_r.spacing)
    sgn = 1.0 if branch >= 0 else -1.0

    def family(grid: ReservoirGrid, own_is_left: bool):
        n_sys = sys.size
        m_nodes = grid.energies.size
        amp_a = np.zeros(m_nodes, dtype=complex)
        amp_b = np.zeros(m_nodes, dtype=complex)
        hmat = np.zeros((m_nodes, n_sys), dtype=complex)
        xis = np.zeros(m_nodes, dtype=complex)
        etas = np.zeros(m_nodes, dtype=complex)
        lams = np.zeros(m_nodes, dtype=complex)
        for i, w in enumerate(grid.energies):
            xi = boundary_or_exterior(res_l, w)
            eta = boundary_or_exterior(res_r, w)
            x_l, x_r = resolvent_columns(sys, xi, eta, complex(w))
            x_own = x_l if own_is_left else x_r
            u = grid.u[i]
            amp_a[i] = u * np.vdot(sys.coupling_l, x_own)
            amp_b[i] = u * np.vdot(sys.coupling_r, x_own)
            hmat[i] = u * x_own
            xis[i], etas[i] = xi, eta
            lams[i] = _lambda_det(sys, xi, eta, complex(w))
        return amp_a, amp_b, hmat, xis, etas, lams

    a_l, a_r, h, xi_l, eta_l, lam_l = family(grid_l, own_is_left=True)
    abar_l, abar_r, hbar, xi_r, eta_r, lam_r = family(grid_r, own_is_left=False)

    tiny = np.abs(np.concatenate([lam_l, lam_r]))
    if np.any(tiny < 1e-10):
        w_bad = np.concatenate([grid_l.energies, grid_r.energies])[np.argmin(tiny)]
        raise BoundState(f"|Lambda| < 1e-10 at sampled energy {w_bad}")

    def kernel(amp, own_energies, mode_grid: ReservoirGrid):
        denom = own_energies[:, None] - mode_grid.energies[None, :] + sgn * 1j * delta
        return amp[:, None] * np.conj(mode_grid.u)[None, :] / denom

    return IncomingField(
        sys=sys, grid_l=grid_l, grid_r=grid_r, delta=delta,
        a_l=a_l, a_r=a_r, abar_l=abar_l, abar_r=abar_r, h=h, hbar=hbar,
        m=kernel(a_l, grid_l.energies, grid_l),
        n=kernel(a_r, grid_l.energies, grid_r),
        mbar=kernel(abar_l, grid_r.energies, grid_l),
        nbar=kernel(abar_r, grid_r.energies, grid_r),
        xi_l=xi_l, eta_l=eta_l, xi_r=xi_r, eta_r=eta_r,
        lam_l=lam_l, lam_r=lam_r,
    )


def eigenoperator_residual(field: IncomingField, sys: SystemSpec,
                           res_l: ReservoirChannel, res_r: ReservoirChannel):
    """(f, a, b) residuals of the defining eigenoperator relations.

    The f-residual is the pointwise max over nodes and levels; the a/b
    residuals integrate the defect over the mode index before taking the max
    over field nodes.  Each entry covers both the alpha and beta families.
    """
    gl, gr = field.grid_l, field.grid_r
    wl, wr = sys.coupling_l, sys.coupling_r
    eps = sys.levels

    def f_residual(grid, u, h, own):
        # u_k w_l + h e_l + sum W m u w_l + sum W n u w_r - w_k h
        drive = np.outer(u, wl if own == "L" else wr)
        m_term = (field.m if own == "L" else field.mbar) @ (gl.weights * gl.u)
        n_term = (field.n if own == "L" else field.nbar) @ (gr.weights * gr.u)
        total = (drive + h * eps[None, :]
                 + np.outer(m_term, wl) + np.outer(n_term, wr)
                 - grid.energies[:, None] * h)
        return float(np.max(np.abs(total)))

    def ab_residual(kernel, a_amp, own_energies, mode_grid):
        # u*_{k'} A_k + kernel * (w_{k'} - w_k), integrated in k'
        defect = (np.conj(mode_grid.u)[None, :] * a_amp[:, None]
                  + kernel * (mode_grid.energies[None, :]
                              - own_energies[:, None]))
        return float(np.max(np.abs(defect) @ mode_grid.weights))

    f_res = max(
        f_residual(gl, gl.u, field.h, "L"),
        f_residual(gr, gr.u, field.hbar, "R"),
    )
    a_res = max(
        ab_residual(field.m, field.a_l, gl.energies, gl),
        ab_residual(field.mbar, field.abar_l, gr.energies, gl),
    )
    b_res = max(
        ab_residual(field.n, field.a_r, gl.energies, gr),
        ab_residual(field.nbar, field.abar_r, gr.energies, gr),
    )
    return f_res, a_res, b_res


def _masked_max(mat: np.ndarray, e_row: np.ndarray, e_col: np.ndarray,
                window: float) -> float:
    gap = np.abs(e_row[:, None] - e_col[None, :])
    mask = gap > window
    if not np.any(mask):
        mask = np.ones_like(gap, dtype=bool)
    return float(np.max(np.abs(mat)[mask]))


def completeness_residuals(field: IncomingField) -> ResidualReport:
    """Evaluate the nine completeness sums/integrals by grid quadrature."""
    m, n, mbar, nbar = field.m, field.n, field.mbar, field.nbar
    h, hbar = field.h, field.hbar
    wl = field.grid_l.weights
    wr = field.grid_r.weights
    el = field.grid_l.energies
    er = field.grid_r.energies
    window = _WINDOW_FACTOR * field.delta

    mh, nh, mbh, nbh = (x.conj().T for x in (m, n, mbar, nbar))

    c1 = m + mh + mh @ (wl[:, None] * m) + mbh @ (wr[:, None] * mbar)
    c2 = (m + mh + h @ h.conj().T
          + (m * wl[None, :]) @ mh + (n * wr[None, :]) @ nh)
    c3 = mbh + n + mh @ (wl[:, None] * n) + mbh @ (wr[:, None] * nbar)
    c4 = (mbh + n + h @ hbar.conj().T
          + (m * wl[None, :]) @ mbh + (n * wr[None, :]) @ nbh)
    c5 = nbar + nbh + nh @ (wl[:, None] * n) + nbh @ (wr[:, None] * nbar)
    c6 = (nbar + nbh + hbar @ hbar.conj().T
          + (mbar * wl[None, :]) @ mbh + (nbar * wr[None, :]) @ nbh)
    c7 = h + mh @ (wl[:, None] * h) + mbh @ (wr[:, None] * hbar)
    c8 = hbar + nh @ (wl[:, None] * h) + nbh @ (wr[:, None] * hbar)
    c9 = (h.conj().T @ (wl[:, None] * h) + hbar.conj().T @ (wr[:, None] * hbar)
          - np.eye(field.sys.size))

    # anticommutator relations, assembled from their own expressions
    anti1 = (mbar.T + n.conj() + h.conj() @ hbar.T
             + (m.conj() * wl[None, :]) @ mbar.T
             + (n.conj() * wr[None, :]) @ nbar.T)
    anti2 = (m.T + m.conj() + h.conj() @ h.T
             + (m.conj() * wl[None, :]) @ m.T
             + (n.conj() * wr[None, :]) @ n.T)
    anti3 = (nbar.T + nbar.conj() + hbar.conj() @ hbar.T
             + (mbar.conj() * wl[None, :]) @ mbar.T
             + (nbar.conj() * wr[None, :]) @ nbar.T)

    return ResidualReport(
        c1=_masked_max(c1, el, el, window),
        c2=_masked_max(c2, el, el, window),
        c3=_masked_max(c3, el, er, window),
        c4=_masked_max(c4, el, er, window),
        c5=_masked_max(c5, er, er, window),
        c6=_masked_max(c6, er, er, window),
        c7=float(np.max(np.abs(c7))),
        c8=float(np.max(np.abs(c8))),
        c9=float(np.max(np.abs(c9))),
        anti1=_masked_max(anti1, el, er, window),
        anti2=_masked_max(anti2, el, el, window),
        anti3=_masked_max(anti3, er, er, window),
    )


def bound_state_scan(sys: SystemSpec, res_l: ReservoirChannel,
                     res_r: ReservoirChannel, panels: int = 64,
                     margin: float = 2.0) -> list[float]:
    """Real zeros of Lambda outside the band union: genuine discrete eigenvalues.

    Outside both bands the self-energies are real Cauchy transforms, so Lambda
    is real there; sign changes are bracketed on `panels` panels per side and
    refined by root finding.
    """
    lo, hi = band_union(res_l, res_r)
    width = hi - lo
    spread = sys.spread()
    scan_lo = min(lo, float(sys.levels.min())) - margin * max(width, spread) * 0.5
    scan_hi = max(hi, float(sys.levels.max())) + margin * max(width, spread) * 0.5
    pad = 1e-9 * width

    def lam_real(w: float) -> float:
        xi = exterior_value(res_l, w) if not res_l.contains(w) else None
        eta = exterior_value(res_r, w) if not res_r.contains(w) else None
        if xi is None or eta is None:
            return np.nan
        return _lambda_det(sys, xi, eta, complex(w)).real

    roots: list[float] = []
    for seg_lo, seg_hi in ((scan_lo, lo - pad), (hi + pad, scan_hi)):
        if seg_hi <= seg_lo:
            continue
        xs = np.linspace(seg_lo, seg_hi, panels + 1)
        vals = np.array([lam_real(x) for x in xs])
        for x0, x1, v0, v1 in zip(xs[:-1], xs[1:], vals[:-1], vals[1:]):
            if not (np.isfinite(v0) and np.isfinite(v1)):
                continue
            if v0 == 0.0:
                roots.append(float(x0))
            elif v0 * v1 < 0.0:
                r = optimize.brentq(lam_real, x0, x1, xtol=1e-12 * max(1.0, width))
                roots.append(float(r))
    return sorted(roots)


def branch_diagnostic(field: IncomingField, t: float | None = None) -> float:
    """Far-past reconstruction defect: the phase-tagged kernel mass left at time t.

    Built from the inverse expansion of the bare left modes over the field; for
    the physical branch this dies out as t -> -infinity, for the flipped branch
    the regularized pole keeps an O(1) mass until |t| ~ 1/delta.
    """
    if t is None:
        t = -3.0 / field.delta
    gl, gr = field.grid_l, field.grid_r
    phase_l = np.exp(-1j * (gl.energies[:, None] - gl.energies[None, :]) * t)
    phase_r = np.exp(-1j * (gr.energies[:, None] - gl.energies[None, :]) * t)
    term_l = (gl.weights[:, None] * np.conj(field.m) * phase_l).sum(axis=0)
    term_r = (gr.weights[:, None] * np.conj(field.mbar) * phase_r).sum(axis=0)
    defect = term_l + term_r
    return float(np.sqrt(np.sum(gl.weights * np.abs(defect) ** 2)))


def ness_current_from_field(field: IncomingField, th: ThermoState) -> float:
    """Current from the steady-state two-point functions transported through
    the field coefficients (occupations f_L/f_R on the alpha/beta families).

    Independent route to the same current as the frequency-space formula; the
    kernel regularization makes it accurate to O(delta).
    """
    gl, gr = field.grid_l, field.grid_r
    wl_sys = field.sys.coupling_l
    f_l = np.array([fermi(th, "L", w) for w in gl.energies])
    f_r = np.array([fermi(th, "R", w) for w in gr.energies])

    uw = gl.weights * gl.u  # W_k u_k over the left grid
    # direct term: sum_k W u_k w_l conj(h[k,l]) f_L(k)
    direct = np.sum((uw * f_l)[:, None] * wl_sys[None, :] * np.conj(field.h))
    # kernel terms: sum_{k,p} W_k u_k w_l kernel[p,k] conj(sys[p,l]) f(p) W_p
    amp_l = (gl.weights * f_l)[:, None] * field.m          # (p, k) over left field
    amp_r = (gr.weights * f_r)[:, None] * field.mbar       # (p, k) over right field
    mixed = (np.einsum("pk,pl,k,l->", amp_l, np.conj(field.h), uw, wl_sys)
             + np.einsum("pk,pl,k,l->", amp_r, np.conj(field.hbar), uw, wl_sys))
    return float(2.0 * np.imag(direct + mixed))
