"""Bipartite and multipartite entanglement measures on two-spin states.

Point values for symmetric states; interval values in the broken-symmetry
phase, where p^xz is only known through positivity bounds and every measure is
evaluated across the admissible q range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import (
    BROKEN,
    PSD_TOL,
    SYMMETRIC,
    Interval,
    ModelParams,
    NonPositiveStateError,
    ParameterDomainError,
)
from .correlators import (
    correlator_set,
    ground_state_energy_per_site,
    transverse_magnetization,
)
from .density_matrix import TwoSpinDensityMatrix, assemble_rho, inner_endpoints, validate_rho

CLIP_TOL = 1e-12

# sigma^y x sigma^y is real in this basis
_YY = np.array([
    [0.0, 0.0, 0.0, -1.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0, 0.0],
])

BRANCH_CP = "Cp"     # C'(n) / u1(n) regime
BRANCH_CPP = "Cpp"   # C''(n) / u3(n) regime


def _as_matrix(rho) -> np.ndarray:
    m = rho.entries if isinstance(rho, TwoSpinDensityMatrix) else np.asarray(rho, dtype=float)
    diag = validate_rho(m)
    if not diag.psd:
        raise NonPositiveStateError(
            f"matrix is not PSD within {PSD_TOL:g} (min eigenvalue {diag.min_eigenvalue:.3e})"
        )
    if abs(diag.trace - 1.0) > 1e-8:
        raise NonPositiveStateError(f"trace {diag.trace!r} != 1")
    return 0.5 * (m + m.T)


def r_spectrum(rho) -> np.ndarray:
    """Square roots of the eigenvalues of R = rho rho~, sorted descending."""
    m = _as_matrix(rho)
    w, v = np.linalg.eigh(m)
    w = np.clip(w, 0.0, None)
    sqrt_m = (v * np.sqrt(w)) @ v.T
    s = sqrt_m @ (_YY @ m @ _YY) @ sqrt_m
    eigs = np.linalg.eigvalsh(0.5 * (s + s.T))
    if eigs[0] < -CLIP_TOL:
        raise NonPositiveStateError(f"R-spectrum eigenvalue {eigs[0]:.3e} < -{CLIP_TOL:g}")
    eps = np.sqrt(np.clip(eigs, 0.0, None))
    return eps[::-1]


def concurrence(rho):
    """Wootters concurrence of an arbitrary two-qubit state.

    Returns (value, r_spectrum). This numeric path is mandatory in the
    broken-symmetry phase, where the closed forms do not apply.
    """
    eps = r_spectrum(rho)
    return max(0.0, float(eps[0] - eps[1] - eps[2] - eps[3])), eps


def c_prime(cs) -> float:
    return 0.5 * (abs(cs.pxx - cs.pyy) + cs.pzz - 1.0)


def c_double_prime(cs) -> float:
    inner = (1.0 + cs.pzz) ** 2 - 4.0 * cs.pz**2
    return 0.5 * (abs(cs.pxx + cs.pyy) - math.sqrt(max(inner, 0.0)))


def _require_symmetric(cs):
    if cs.state_kind != SYMMETRIC or cs.px != 0.0 or cs.pxz != Interval.point(0.0):
        raise ParameterDomainError(
            "closed forms hold only for symmetric correlator sets (px = 0, pxz = {0})"
        )


def concurrence_closed_form(cs) -> float:
    """max{0, C'(n), C''(n)} for a symmetric correlator set."""
    _require_symmetric(cs)
    return max(0.0, c_prime(cs), c_double_prime(cs))


def pt_spectrum(rho) -> np.ndarray:
    """Eigenvalues of the partial transpose over the second site, ascending."""
    m = _as_matrix(rho)
    pt = m.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)
    return np.linalg.eigvalsh(0.5 * (pt + pt.T))


def negativity(rho):
    """N = max{0, -2 min eig(rho^T_B)}; returns (value, pt_spectrum)."""
    u = pt_spectrum(rho)
    return max(0.0, -2.0 * float(u[0])), u


def negativity_closed_form(cs) -> float:
    """Closed form from the partial-transpose block eigenvalues (symmetric sets)."""
    _require_symmetric(cs)
    u1 = 0.25 * ((1.0 + cs.pzz)
                 - math.sqrt((cs.pxx + cs.pyy) ** 2 + 4.0 * cs.pz**2))
    u3 = 0.25 * ((1.0 - cs.pzz) - abs(cs.pxx - cs.pyy))
    return max(0.0, -2.0 * min(u1, u3))


def symmetry_equivalence_lhs(cs) -> float:
    """LHS of the symmetry-equivalence condition.

    Positive means the symmetric-state concurrence expression remains valid for
    the broken-symmetry state; it changes sign at the disorder point.
    """
    inner = (1.0 + cs.pzz) ** 2 - 4.0 * cs.pz**2
    return math.sqrt(max(inner, 0.0)) + cs.pzz - 2.0 * cs.pyy - 1.0


def branch_indicator(params: ModelParams) -> str:
    """Which closed-form branch carries the concurrence at these couplings."""
    if params.lam == 0.0:
        return BRANCH_CP
    return BRANCH_CP if params.gamma**2 + 1.0 / params.lam**2 > 1.0 else BRANCH_CPP


def g1(cs) -> float:
    """One-site global entanglement 2(1 - Tr rho_1^2) = 1 - px^2 - pz^2."""
    return 1.0 - cs.px**2 - cs.pz**2


def g2_at_q(cs, q: float) -> float:
    """Two-site global entanglement (4/3)(1 - Tr rho^2) at p^xz = q."""
    s = (2.0 * cs.px**2 + 2.0 * cs.pz**2 + 2.0 * q**2
         + cs.pxx**2 + cs.pyy**2 + cs.pzz**2)
    return 1.0 - s / 3.0


def g1_purity(rho) -> float:
    """G(1) from the one-site reduction of a two-spin matrix (d = 2 scaling)."""
    m = _as_matrix(rho)
    r1 = m.reshape(2, 2, 2, 2).trace(axis1=1, axis2=3)
    return 2.0 * (1.0 - float(np.trace(r1 @ r1)))


def g2_purity(rho) -> float:
    """G(2, n) from the two-site purity (d = 4 scaling)."""
    m = _as_matrix(rho)
    return (4.0 / 3.0) * (1.0 - float(np.trace(m @ m)))


N_INTERIOR_SAMPLES = 32


def _q_samples(cs):
    iv = inner_endpoints(cs.pxz)
    if iv.width <= 0.0:
        return np.array([iv.mid])
    interior = np.linspace(iv.lo, iv.hi, N_INTERIOR_SAMPLES + 2)[1:-1]
    return np.concatenate([[iv.lo], interior, [iv.hi]])


def interval_measure(cs, fn):
    """Evaluate fn(rho) across the admissible p^xz range.

    Returns (Interval, interior_extremum_flag). Monotonicity in q is not
    assumed; an interior sample beating both endpoints raises the flag.
    """
    qs = _q_samples(cs)
    vals = np.array([fn(assemble_rho(cs, q)) for q in qs])
    lo, hi = float(vals.min()), float(vals.max())
    interior = False
    if qs.size > 2:
        edge_lo = min(vals[0], vals[-1])
        edge_hi = max(vals[0], vals[-1])
        interior = bool(lo < edge_lo - 1e-12 or hi > edge_hi + 1e-12)
    return Interval(lo, hi), interior


@dataclass(frozen=True)
class EntanglementReport:
    params: ModelParams
    n: int
    state_kind: str
    concurrence: Interval
    negativity: Interval
    g1: float
    g2: Interval
    r_spectrum_lo: np.ndarray
    r_spectrum_hi: np.ndarray
    pt_spectrum_lo: np.ndarray
    pt_spectrum_hi: np.ndarray
    branch: str
    energy: float
    flags: tuple
    correlators: object


def entanglement_report(params: ModelParams, n: int, state_kind: str = SYMMETRIC,
                        cs=None) -> EntanglementReport:
    """All measures, spectra, and the energy density at one grid point."""
    if cs is None:
        cs = correlator_set(n, params, state_kind)
    flags = []
    if cs.state_kind == SYMMETRIC:
        rho = assemble_rho(cs, 0.0)
        c_val, eps = concurrence(rho)
        n_val, u = negativity(rho)
        c_iv, n_iv = Interval.point(c_val), Interval.point(n_val)
        g2_iv = Interval.point(g2_at_q(cs, 0.0))
        eps_lo = eps_hi = eps
        u_lo = u_hi = u
    else:
        endpoints = inner_endpoints(cs.pxz)
        c_iv, c_flag = interval_measure(cs, lambda r: concurrence(r)[0])
        n_iv, n_flag = interval_measure(cs, lambda r: negativity(r)[0])
        qs = _q_samples(cs)
        g2_vals = [g2_at_q(cs, q) for q in qs]
        g2_iv = Interval(float(min(g2_vals)), float(max(g2_vals)))
        if c_flag or n_flag:
            flags.append("interior_extremum")
        eps_lo = r_spectrum(assemble_rho(cs, endpoints.lo))
        eps_hi = r_spectrum(assemble_rho(cs, endpoints.hi))
        u_lo = pt_spectrum(assemble_rho(cs, endpoints.lo))
        u_hi = pt_spectrum(assemble_rho(cs, endpoints.hi))
    return EntanglementReport(
        params=params, n=n, state_kind=cs.state_kind,
        concurrence=c_iv, negativity=n_iv,
        g1=g1(cs), g2=g2_iv,
        r_spectrum_lo=eps_lo, r_spectrum_hi=eps_hi,
        pt_spectrum_lo=u_lo, pt_spectrum_hi=u_hi,
        branch=branch_indicator(params),
        energy=ground_state_energy_per_site(params),
        flags=tuple(flags),
        correlators=cs,
    )


def _track_top_swaps(lams, eps_rows, ratio_tol=0.25, floor=1e-8):
    """Largest-eigenvalue identity changes under predictive curve tracking.

    Curves are matched between adjacent grid points by minimal displacement
    from a constant-velocity prediction of each curve. A swap of the top
    curve is kept only when the crossing assignment beats straight-through
    continuation decisively (total cost below ratio_tol of it): at a
    transversal crossing the prediction is accurate and the ratio is small,
    while at an osculation -- all curves collapsing to a common floor and
    bouncing, as happens at the disorder point in the broken-symmetry state
    -- both assignments predict poorly and the event is discarded.
    """
    eps = np.asarray(eps_rows)
    m = eps.shape[1]
    ids = np.arange(m)
    velocity = np.zeros(m)
    events = []
    for t in range(1, eps.shape[0]):
        pred = eps[t - 1] + velocity
        cost = np.abs(eps[t][:, None] - pred[None, :])
        _, cols = linear_sum_assignment(cost)
        swapped = ids[cols]
        if swapped[0] != ids[0]:
            cross_cost = float(cost[np.arange(m), cols].sum())
            stay_cost = float(np.abs(eps[t] - pred).sum())
            if (cross_cost <= ratio_tol * stay_cost
                    and max(eps[t][0], eps[t - 1][0]) > floor):
                events.append(0.5 * (lams[t - 1] + lams[t]))
            else:
                # osculation: keep identities position-sorted through it
                cols = np.arange(m)
                swapped = ids
        ids = swapped
        velocity = eps[t] - eps[t - 1][cols]
    return events


def r_spectrum_scan(gamma: float, lams, n: int = 1, state_kind: str = SYMMETRIC,
                    q_choice: str = "hi"):
    """Track the four R-spectrum branches along a lambda grid.

    Returns a dict with the eps table, per-point branch flags, branch-flip
    locations (midpoints where the closed-form branch indicator changes), and
    crossing locations found by curve tracking. Broken-symmetry states are
    evaluated at the chosen p^xz endpoint.
    """
    lams = [float(x) for x in lams]
    eps_rows, branches = [], []
    for lam in lams:
        params = ModelParams(gamma=gamma, lam=lam)
        cs = correlator_set(n, params, state_kind)
        if cs.state_kind == SYMMETRIC:
            q = 0.0
        else:
            iv = inner_endpoints(cs.pxz)
            q = iv.hi if q_choice == "hi" else iv.lo
        eps_rows.append(r_spectrum(assemble_rho(cs, q)))
        branches.append(branch_indicator(params))
    flips = [0.5 * (lams[i] + lams[i + 1])
             for i in range(len(lams) - 1) if branches[i] != branches[i + 1]]
    return {
        "lams": lams,
        "eps": np.asarray(eps_rows),
        "branches": branches,
        "branch_flips": flips,
        "crossings": _track_top_swaps(lams, eps_rows),
    }


def energy_derivative_identities(params: ModelParams, dl: float = 1e-4):
    """Residuals of the energy-derivative identities at one coupling.

    hf: second lambda-derivative of the energy against -(1/lam) d(pz)/dlam.
    matrix: the same second derivative against -(2/lam) d(rho_11 + rho_22)/dlam,
    the matrix-element form under this package's field orientation.
    c1: concurrence against the matrix-element expression 2(rho_41 - rho_22),
    meaningful in the Cp branch only.
    """
    lam = params.lam
    if lam <= dl:
        raise ParameterDomainError("lambda too small for central differences")

    def energy(x):
        return ground_state_energy_per_site(ModelParams(params.gamma, x))

    def pz(x):
        return transverse_magnetization(ModelParams(params.gamma, x))

    def top_block(x):
        cs = correlator_set(1, ModelParams(params.gamma, x), SYMMETRIC)
        m = assemble_rho(cs, 0.0).entries
        return m[0, 0] + m[1, 1]

    d2e = (energy(lam + dl) - 2.0 * energy(lam) + energy(lam - dl)) / dl**2
    dpz = (pz(lam + dl) - pz(lam - dl)) / (2.0 * dl)
    dtop = (top_block(lam + dl) - top_block(lam - dl)) / (2.0 * dl)

    cs = correlator_set(1, params, SYMMETRIC)
    rho = assemble_rho(cs, 0.0)
    c_val, _ = concurrence(rho)
    c1_matrix = 2.0 * (rho.entries[3, 0] - rho.entries[1, 1])

    return {
        "d2_energy": d2e,
        "hf_residual": abs(d2e + dpz / lam),
        "matrix_residual": abs(d2e + 2.0 * dtop / lam),
        "c1_residual": abs(c_val - c1_matrix),
        "branch": branch_indicator(params),
    }


def concurrence_lambda_derivative(gamma: float, lam: float, step: float = None) -> float:
    """d C(1) / d lambda of the symmetric state by central differences.

    The default step shrinks near lam = 1 so the stencil never straddles the
    critical point, letting the logarithmic divergence show itself under grid
    refinement instead of smoothing it away.
    """
    if step is None:
        step = min(1e-3, abs(lam - 1.0) / 8.0) if lam != 1.0 else 1e-5
    c_hi = concurrence_closed_form(correlator_set(1, ModelParams(gamma, lam + step)))
    c_lo = concurrence_closed_form(correlator_set(1, ModelParams(gamma, lam - step)))
    return (c_hi - c_lo) / (2.0 * step)
