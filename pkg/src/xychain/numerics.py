"""Low-level numerical kernels: adaptive quadrature, sequence acceleration, tail fits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Gauss-Kronrod 15-point rule on [-1, 1] (QUADPACK dqk15 constants).
# Odd-index nodes form the embedded 7-point Gauss rule.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# full symmetric node/weight vectors, length 15
K15_NODES = np.concatenate([-_XGK[:7], _XGK[::-1][:8]])
K15_WEIGHTS = np.concatenate([_WGK[:7], _WGK[::-1][:8]])
# positions of the Gauss-7 subset inside K15_NODES and matching weights
_G7_IDX = np.array([1, 3, 5, 7, 9, 11, 13])
G7_WEIGHTS = np.concatenate([_WG[:3], _WG[::-1][:4]])


class QuadratureError(RuntimeError):
    """Adaptive integration failed to reach the requested tolerance."""


def _eval_panels(f, lo, hi):
    """Kronrod estimate and error for a batch of panels [lo_i, hi_i]."""
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = mid[:, None] + half[:, None] * K15_NODES[None, :]
    fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    if not np.all(np.isfinite(fx)):
        raise QuadratureError("non-finite integrand values inside a panel")
    k = (fx * K15_WEIGHTS).sum(axis=1) * half
    g = (fx[:, _G7_IDX] * G7_WEIGHTS).sum(axis=1) * half
    return k, np.abs(k - g)


def quadrature(f, a, b, abs_tol=1e-11, breakpoints=(), max_panels=4096):
    """Integrate a vectorized callable f over [a, b] to absolute tolerance.

    f must accept a 1-D ndarray of abscissae and return values of the same
    shape. breakpoints are interior points where the integrand has kinks; the
    initial panel set splits there. The per-panel |K15 - G7| difference is used
    as a conservative error bound. Returns (value, error_estimate).
    """
    if b == a:
        return 0.0, 0.0
    if b < a:
        value, err = quadrature(f, b, a, abs_tol=abs_tol,
                                breakpoints=breakpoints,
                                max_panels=max_panels)
        return -value, err
    pts = [a] + sorted(p for p in breakpoints if a < p < b) + [b]
    los = np.array(pts[:-1], dtype=float)
    his = np.array(pts[1:], dtype=float)
    vals, errs = _eval_panels(f, los, his)

    total_width = b - a
    while errs.sum() > abs_tol:
        if los.size >= max_panels:
            raise QuadratureError(
                f"tolerance {abs_tol:g} not reached with {los.size} panels "
                f"(error {errs.sum():.3e})"
            )
        # split every panel holding more than its width-proportional share;
        # guarantee progress by always splitting the worst one
        share = abs_tol * (his - los) / total_width
        split = errs > share
        if not split.any():
            split[np.argmax(errs)] = True
        keep = ~split
        mids = 0.5 * (los[split] + his[split])
        new_lo = np.concatenate([los[split], mids])
        new_hi = np.concatenate([mids, his[split]])
        new_vals, new_errs = _eval_panels(f, new_lo, new_hi)
        los = np.concatenate([los[keep], new_lo])
        his = np.concatenate([his[keep], new_hi])
        vals = np.concatenate([vals[keep], new_vals])
        errs = np.concatenate([errs[keep], new_errs])

    return float(vals.sum()), float(errs.sum())


def aitken_limit(seq):
    """Iterated Aitken delta-squared acceleration of a convergent sequence.

    Returns (limit, last_delta): the deepest accelerated value and the
    magnitude of the final correction, usable as a crude error estimate.
    """
    s = [float(x) for x in seq]
    if len(s) == 0:
        raise ValueError("empty sequence")
    if len(s) == 1:
        return s[0], math.inf
    if len(s) == 2:
        return s[1], abs(s[1] - s[0])
    last = s[-1]
    prev = s[-2]
    while len(s) >= 3:
        t = []
        for i in range(len(s) - 2):
            d1 = s[i + 1] - s[i]
            d2 = s[i + 2] - 2.0 * s[i + 1] + s[i]
            if d2 == 0.0:
                t.append(s[i + 2])
            else:
                t.append(s[i] - d1 * d1 / d2)
        prev, last = last, t[-1]
        s = t
    return last, abs(last - prev)


@dataclass
class DecayFit:
    """Result of a log-linear exponential-decay fit.

    length is the decay constant xi in dev(n) ~ A exp(-n/xi); rejected marks
    non-exponential residual structure; constant marks an all-below-floor
    deviation series (length = inf).
    """

    length: float
    amplitude: float
    max_rel_residual: float
    window: tuple
    rejected: bool
    constant: bool = False


def fit_exponential_decay(ns, devs, dev_floor=1e-12, min_points=4,
                          residual_tol=0.05, n_min=3):
    """Fit log(devs) = log(A) - n/xi over the window devs > dev_floor, n >= n_min.

    The fit is rejected when the maximum absolute residual exceeds
    residual_tol times the total log-range (curved, non-exponential data) or
    when the slope is nonnegative.
    """
    ns = np.asarray(ns, dtype=float)
    devs = np.asarray(devs, dtype=float)
    if ns.shape != devs.shape:
        raise ValueError("ns and devs must have matching shapes")
    mask = (devs > dev_floor) & (ns >= n_min)
    if not mask.any():
        return DecayFit(math.inf, 0.0, 0.0, (0, 0), rejected=False, constant=True)
    if mask.sum() < min_points:
        return DecayFit(math.nan, math.nan, math.nan,
                        (int(ns[mask].min()), int(ns[mask].max())),
                        rejected=True)
    x = ns[mask]
    y = np.log(devs[mask])
    design = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    drop = float(y.max() - y.min())
    rel = float(np.max(np.abs(resid)) / max(drop, 1e-30))
    slope = float(coef[1])
    rejected = rel > residual_tol or slope >= 0.0
    length = -1.0 / slope if slope < 0.0 else math.inf
    return DecayFit(length, float(math.exp(coef[0])), rel,
                    (int(x.min()), int(x.max())), rejected=rejected)
