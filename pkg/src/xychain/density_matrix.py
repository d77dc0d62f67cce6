"""Two-spin reduced density matrices and positivity bounds for p^xz.

The matrix lives in the product basis (uu, ud, du, dd) with u meaning
sigma^z = +1. All entries are real combinations of the correlator set and of
the one unknown off-diagonal correlator q = p^xz, which enters linearly; the
admissible q values are exactly those keeping the matrix positive
semidefinite.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .model import (
    PSD_TOL,
    SYMMETRIC,
    InconsistentCorrelatorsError,
    Interval,
)

# q-coefficient of the density matrix (constant sparsity pattern)
_Q_BLOCK = 0.25 * np.array([
    [0.0, 1.0, 1.0, 0.0],
    [1.0, 0.0, 0.0, -1.0],
    [1.0, 0.0, 0.0, -1.0],
    [0.0, -1.0, -1.0, 0.0],
])

COARSE_STEP = 1e-3
EDGE_TOL = 1e-9
ENDPOINT_NUDGE = 1e-12
# a feasible-set deficit below PSD_TOL but above this is accumulated
# correlator error at a collapsed (one-point) window, not a contradiction
INFEASIBLE_TOL = 1e-8


def _base_matrix(cs) -> np.ndarray:
    px, pz = cs.px, cs.pz
    pxx, pyy, pzz = cs.pxx, cs.pyy, cs.pzz
    return 0.25 * np.array([
        [1.0 + 2.0 * pz + pzz, px, px, pxx - pyy],
        [px, 1.0 - pzz, pxx + pyy, px],
        [px, pxx + pyy, 1.0 - pzz, px],
        [pxx - pyy, px, px, 1.0 - 2.0 * pz + pzz],
    ])


@dataclass(frozen=True)
class TwoSpinDensityMatrix:
    entries: np.ndarray
    source: object
    q_xz: float

    @property
    def matrix(self) -> np.ndarray:
        return self.entries


def assemble_rho(cs, q: float) -> TwoSpinDensityMatrix:
    """Two-spin density matrix for correlator set cs with p^xz = q."""
    entries = _base_matrix(cs) + float(q) * _Q_BLOCK
    return TwoSpinDensityMatrix(entries=entries, source=cs, q_xz=float(q))


@dataclass(frozen=True)
class RhoDiagnostics:
    trace: float
    symmetry_residual: float
    eigenvalues: np.ndarray
    min_eigenvalue: float
    psd: bool


def validate_rho(rho, tol: float = PSD_TOL) -> RhoDiagnostics:
    """Trace, symmetry residual, spectrum, and PSD verdict of a 4x4 matrix."""
    m = rho.entries if isinstance(rho, TwoSpinDensityMatrix) else np.asarray(rho, dtype=float)
    if m.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got shape {m.shape}")
    sym_res = float(np.max(np.abs(m - m.T)))
    eigs = np.linalg.eigvalsh(0.5 * (m + m.T))
    return RhoDiagnostics(
        trace=float(np.trace(m)),
        symmetry_residual=sym_res,
        eigenvalues=eigs,
        min_eigenvalue=float(eigs[0]),
        psd=bool(eigs[0] >= -tol),
    )


def _min_eig(cs, qs):
    """lambda_min of the density matrix for a vector of q values."""
    qs = np.atleast_1d(np.asarray(qs, dtype=float))
    mats = _base_matrix(cs)[None, :, :] + qs[:, None, None] * _Q_BLOCK[None, :, :]
    return np.linalg.eigvalsh(mats)[:, 0]


@dataclass(frozen=True)
class XzBoundResult:
    interval: Interval
    q_grid: np.ndarray
    min_eig_profile: np.ndarray
    flags: tuple
    feasible_runs: tuple


def _bisect_edge(cs, q_out, q_in, tol=EDGE_TOL):
    """Root of lambda_min(q) = 0 between an infeasible and a feasible q."""
    f_out = float(_min_eig(cs, q_out)[0])
    f_in = float(_min_eig(cs, q_in)[0])
    if f_out >= 0.0:
        return float(q_out)
    if f_in <= 0.0:
        return float(q_in)
    while abs(q_in - q_out) > tol:
        mid = 0.5 * (q_in + q_out)
        if float(_min_eig(cs, mid)[0]) >= 0.0:
            q_in = mid
        else:
            q_out = mid
    return float(q_in)


def xz_bounds(cs, coarse_step: float = COARSE_STEP) -> XzBoundResult:
    """Positivity bounds for p^xz: the q-interval keeping rho PSD.

    A coarse scan over [-1, 1] brackets the feasible set; each edge is then
    bisected to 1e-9. lambda_min(q) is concave, so when the coarse scan finds
    nothing the maximum is located by golden-section refinement before
    declaring the set empty: feasible needles narrower than the scan step
    occur just below the disorder point. At the disorder point itself the
    window collapses to one point and accumulated correlator error can push
    the refined maximum a few 1e-10 below zero; that case is reported as
    "degenerate" (callers repair it, see repaired_point_set). Only a deficit
    beyond INFEASIBLE_TOL raises InconsistentCorrelatorsError.
    """
    if cs.state_kind == SYMMETRIC:
        grid = np.array([0.0])
        return XzBoundResult(Interval.point(0.0), grid, _min_eig(cs, grid),
                             flags=(), feasible_runs=(Interval.point(0.0),))

    qs = np.arange(-1.0, 1.0 + 0.5 * coarse_step, coarse_step)
    profile = _min_eig(cs, qs)
    feasible = profile >= -PSD_TOL
    flags = []

    runs = []
    idx = np.flatnonzero(feasible)
    if idx.size:
        run_start = idx[0]
        prev = idx[0]
        for i in idx[1:]:
            if i != prev + 1:
                runs.append((run_start, prev))
                run_start = i
            prev = i
        runs.append((run_start, prev))

    if not runs:
        j = int(np.argmax(profile))
        lo_q = qs[max(j - 1, 0)]
        hi_q = qs[min(j + 1, qs.size - 1)]
        res = minimize_scalar(lambda q: -float(_min_eig(cs, q)[0]),
                              bounds=(lo_q, hi_q), method="bounded",
                              options={"xatol": 1e-12})
        q_star, v_star = float(res.x), -float(res.fun)
        if v_star < -INFEASIBLE_TOL:
            raise InconsistentCorrelatorsError(
                f"no PSD-compatible p^xz at gamma={cs.params.gamma}, "
                f"lam={cs.params.lam}, n={cs.n}: max lambda_min = {v_star:.3e}"
            )
        if v_star <= PSD_TOL:
            flags.append("degenerate")
            interval = Interval(q_star, q_star)
        else:
            flags.append("needle")
            interval = Interval(_bisect_edge(cs, lo_q, q_star),
                                _bisect_edge(cs, hi_q, q_star))
        return XzBoundResult(interval, qs, profile, tuple(flags), (interval,))

    if len(runs) > 1:
        flags.append("multiple_intervals")
    run_intervals = []
    for a, b in runs:
        # anchor the bisection at the best interior point of the run
        interior = a + int(np.argmax(profile[a:b + 1]))
        if profile[interior] <= PSD_TOL:
            run_intervals.append(Interval(float(qs[interior]), float(qs[interior])))
            if "degenerate" not in flags:
                flags.append("degenerate")
            continue
        lo = (float(qs[a]) if a == 0
              else _bisect_edge(cs, float(qs[a - 1]), float(qs[interior])))
        hi = (float(qs[b]) if b == qs.size - 1
              else _bisect_edge(cs, float(qs[b + 1]), float(qs[interior])))
        run_intervals.append(Interval(lo, hi))
    primary = max(run_intervals, key=lambda iv: iv.width)
    return XzBoundResult(primary, qs, profile, tuple(flags), tuple(run_intervals))


def repaired_point_set(cs, q_star: float):
    """Depolarizing repair of a degenerate positivity window.

    Mixing in eps/4 of the identity scales every Pauli coefficient by
    1 - eps and lifts lambda_min by about eps/4, so a deficit d (at most
    INFEASIBLE_TOL, by construction of the caller) is cured by eps ~ 6 d
    while every correlator moves by O(d). Returns the repaired set with
    p^xz pinned to the rescaled q_star; a set that is already feasible at
    q_star is returned with the point interval and no rescaling.
    """
    deficit = -float(_min_eig(cs, q_star)[0])
    if deficit <= 0.0:
        return replace(cs, pxz=Interval.point(float(q_star)))
    eps = 6.0 * deficit
    s = 1.0 - eps
    return replace(
        cs,
        px=s * cs.px, pz=s * cs.pz,
        pxx=s * cs.pxx, pyy=s * cs.pyy, pzz=s * cs.pzz,
        pxz=Interval.point(s * float(q_star)),
    )


def inner_endpoints(interval: Interval, nudge: float = ENDPOINT_NUDGE) -> Interval:
    """Endpoints pulled inward to avoid eigenvalue sign flicker downstream."""
    if interval.width <= 2.0 * nudge:
        return Interval.point(interval.mid)
    return Interval(interval.lo + nudge, interval.hi - nudge)


def flipped(cs):
    """Correlator set after sigma^x -> -sigma^x on both sites.

    Flips the signs of p^x and p^xz; all measures must be invariant.
    """
    return replace(cs, px=-cs.px, pxz=Interval(-cs.pxz.hi, -cs.pxz.lo))
