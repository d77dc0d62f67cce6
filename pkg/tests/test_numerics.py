"""Quadrature, sequence acceleration, and decay-fit unit tests.

The Gauss-Kronrod integrator is validated against closed-form integrals and
against an independent adaptive-quadrature route (scipy.integrate.quad) on
the same integrands the physics code uses.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from xychain.numerics import (
    QuadratureError,
    aitken_limit,
    fit_exponential_decay,
    quadrature,
)


def _vec(f):
    """Lift a scalar function to the batched signature quadrature expects."""
    return lambda xs: np.array([f(x) for x in xs])


class TestQuadrature:
    def test_polynomial_exact(self):
        val, err = quadrature(lambda x: x ** 3 - 2 * x + 1, 0.0, 2.0)
        assert val == pytest.approx(2.0, abs=1e-13)
        assert err < 1e-10

    def test_exponential_closed_form(self):
        val, _ = quadrature(np.exp, 0.0, 1.0)
        assert val == pytest.approx(math.e - 1.0, abs=1e-12)

    def test_sine_closed_form(self):
        val, _ = quadrature(np.sin, 0.0, math.pi)
        assert val == pytest.approx(2.0, abs=1e-12)

    def test_matches_independent_route_smooth(self):
        f = lambda x: np.exp(-x) * np.cos(7.0 * x)
        ours, _ = quadrature(f, 0.0, 3.0)
        ref, _ = quad(lambda x: math.exp(-x) * math.cos(7.0 * x), 0.0, 3.0,
                      epsabs=1e-13, epsrel=1e-13)
        assert ours == pytest.approx(ref, abs=1e-11)

    def test_matches_independent_route_kinked(self):
        # |cos| has a derivative kink at pi/2; the breakpoint hint must keep
        # full accuracy
        ours, _ = quadrature(lambda x: np.abs(np.cos(x)), 0.0, math.pi,
                             breakpoints=(math.pi / 2,))
        ref, _ = quad(lambda x: abs(math.cos(x)), 0.0, math.pi,
                      points=[math.pi / 2], epsabs=1e-13)
        assert ours == pytest.approx(ref, abs=1e-11)
        assert ours == pytest.approx(2.0, abs=1e-11)

    def test_matches_independent_route_physics_integrand(self):
        # the fermionic-correlator integrand at a generic coupling
        gamma, lam, r = 0.8, 1.3, 1

        def integrand(k):
            a = lam * math.cos(k) - 1.0
            b = lam * gamma * math.sin(k)
            return (a * math.cos(k * r) + b * math.sin(k * r)) / math.hypot(a, b)

        ours, _ = quadrature(_vec(integrand), 0.0, math.pi,
                             breakpoints=(math.acos(1.0 / lam),))
        ref, _ = quad(integrand, 0.0, math.pi,
                      points=[math.acos(1.0 / lam)], epsabs=1e-13)
        assert ours == pytest.approx(ref, abs=1e-10)

    def test_error_estimate_is_reported(self):
        _, err = quadrature(np.exp, 0.0, 1.0)
        assert 0.0 <= err < 1e-10

    def test_non_finite_integrand_raises(self):
        def bad(xs):
            out = np.asarray(xs, dtype=float).copy()
            out[:] = np.inf
            return out

        with pytest.raises(QuadratureError):
            quadrature(bad, 0.0, 1.0)

    def test_inverted_interval_is_signed(self):
        fwd, _ = quadrature(np.exp, 0.0, 1.0)
        rev, _ = quadrature(np.exp, 1.0, 0.0)
        assert rev == pytest.approx(-fwd, abs=1e-12)


class TestAitken:
    def test_geometric_sequence_accelerates(self):
        # partial sums of a geometric series: s_n = 1 - r^(n+1)
        r = 0.6
        seq = [1.0 - r ** (n + 1) for n in range(8)]
        raw_err = abs(seq[-1] - 1.0)
        value, delta = aitken_limit(seq)
        assert abs(value - 1.0) < 1e-12
        assert abs(value - 1.0) < raw_err * 1e-6
        # the reported delta is an order-of-magnitude error estimate
        assert delta < 1e-8

    def test_two_point_sequence(self):
        value, delta = aitken_limit([1.0, 1.5])
        assert value == 1.5
        assert delta == 0.5

    def test_single_point_sequence(self):
        value, delta = aitken_limit([2.0])
        assert value == 2.0
        assert math.isinf(delta)

    def test_empty_sequence_raises(self):
        with pytest.raises(ValueError):
            aitken_limit([])

    def test_constant_sequence(self):
        value, delta = aitken_limit([3.0, 3.0, 3.0, 3.0])
        assert value == 3.0
        assert delta == 0.0


class TestDecayFit:
    def test_pure_exponential_recovered(self):
        ns = np.arange(1, 21, dtype=float)
        devs = 3.0 * np.exp(-ns / 2.5)
        fit = fit_exponential_decay(ns, devs)
        assert not fit.rejected
        assert not fit.constant
        assert fit.length == pytest.approx(2.5, rel=1e-9)
        assert fit.amplitude == pytest.approx(3.0, rel=1e-9)

    def test_power_law_rejected(self):
        ns = np.arange(1, 21, dtype=float)
        devs = ns ** -2.0
        fit = fit_exponential_decay(ns, devs)
        assert fit.rejected

    def test_growing_series_rejected(self):
        ns = np.arange(1, 21, dtype=float)
        devs = np.exp(ns / 5.0)
        fit = fit_exponential_decay(ns, devs)
        assert fit.rejected

    def test_constant_below_floor(self):
        ns = np.arange(1, 11, dtype=float)
        fit = fit_exponential_decay(ns, np.zeros_like(ns))
        assert fit.constant
        assert math.isinf(fit.length)
        assert not fit.rejected

    def test_too_few_points_rejected(self):
        fit = fit_exponential_decay([3.0, 4.0, 5.0], [0.1, 0.05, 0.025])
        assert fit.rejected

    def test_window_respects_n_min(self):
        ns = np.arange(1, 21, dtype=float)
        devs = np.exp(-ns / 3.0)
        fit = fit_exponential_decay(ns, devs, n_min=3)
        assert fit.window[0] >= 3

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError):
            fit_exponential_decay([1.0, 2.0], [1.0, 2.0, 3.0])
