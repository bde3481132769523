"""Quadrature, root finding, RK4, derivative checks, and random streams."""

import math

import numpy as np
import pytest

from fiberflux.core import (
    RngStream,
    ScalarFn,
    affine,
    antiderivative,
    constant,
    derivative_check,
    find_roots,
    integrate,
    lincomb,
    piecewise_linear,
    polynomial,
    rk4_flow,
    scalarfn_from_spec,
    scalarfn_to_spec,
    sinusoid,
)
from fiberflux.errors import EvaluationError, ToleranceNotMetError

TWO_PI = 2.0 * math.pi


class TestIntegrate:
    def test_polynomial_exactness(self):
        assert integrate(lambda t: t) == pytest.approx(0.5, abs=1e-12)
        assert integrate(lambda t: t * t * t) == pytest.approx(0.25, abs=1e-12)

    def test_abs_sine_with_breakpoint(self):
        value = integrate(lambda t: abs(math.sin(TWO_PI * t)),
                          breakpoints=[0.5])
        assert value == pytest.approx(2.0 / math.pi, abs=1e-9)

    def test_min_kink(self):
        value = integrate(lambda t: min(t, 1.0 - t), breakpoints=[0.5])
        assert value == pytest.approx(0.25, abs=1e-12)

    def test_reversed_interval_negates(self):
        assert integrate(lambda t: t, 1.0, 0.0) == pytest.approx(-0.5)

    def test_degenerate_interval(self):
        assert integrate(lambda t: t, 0.3, 0.3) == 0.0

    def test_breakpoints_outside_interval_ignored(self):
        value = integrate(lambda t: t, breakpoints=[-1.0, 2.0, 0.5])
        assert value == pytest.approx(0.5, abs=1e-12)

    def test_nonfinite_value_raises(self):
        def bad(t):
            return math.nan if t > 0.7 else 1.0

        with pytest.raises(EvaluationError) as err:
            integrate(bad)
        assert err.value.t > 0.7

    def test_panel_budget_exhaustion_carries_best_estimate(self):
        def cusp(t):
            # derivative blows up at 0.5; unresolvable at this tolerance
            return abs(t - 0.5) ** 0.05

        with pytest.raises(ToleranceNotMetError) as err:
            integrate(cusp, tol=1e-15)
        assert math.isfinite(err.value.best)
        assert err.value.bound > 1e-15
        assert abs(err.value.best - (2.0 * 0.5 ** 1.05 / 1.05)) < 1e-3

    def test_invalid_tol(self):
        with pytest.raises(ValueError):
            integrate(lambda t: t, tol=0.0)

    def test_linearity_on_random_polynomials(self):
        rng = np.random.default_rng(7)
        tol = 1e-9
        for _ in range(20):
            cu = rng.uniform(-2, 2, 4)
            cv = rng.uniform(-2, 2, 4)
            alpha, beta = rng.uniform(-3, 3, 2)
            u = polynomial(cu)
            v = polynomial(cv)
            combined = integrate(lambda t: alpha * u.eval(t) + beta * v.eval(t),
                                 tol=tol)
            separate = alpha * integrate(u.eval, tol=tol) \
                + beta * integrate(v.eval, tol=tol)
            assert abs(combined - separate) <= 2 * tol * (1 + abs(alpha) + abs(beta))

    def test_interval_additivity(self):
        rng = np.random.default_rng(11)
        tol = 1e-9
        for _ in range(20):
            coeffs = rng.uniform(-2, 2, 5)
            c = float(rng.uniform(0.05, 0.95))
            fn = polynomial(coeffs)
            whole = integrate(fn.eval, 0.0, 1.0, tol=tol)
            split = integrate(fn.eval, 0.0, c, tol=tol) \
                + integrate(fn.eval, c, 1.0, tol=tol)
            assert abs(whole - split) <= 2 * tol


class TestFindRoots:
    def test_linear_root(self):
        assert find_roots(lambda t: t - 0.5) == pytest.approx([0.5], abs=1e-9)

    def test_sine_roots_include_endpoints(self):
        roots = find_roots(sinusoid(1.0, 2).eval)
        assert roots == pytest.approx([0.0, 0.5, 1.0], abs=1e-9)

    def test_no_sign_change(self):
        assert find_roots(lambda t: 1.0) == []

    def test_endpoint_root_by_tolerance(self):
        roots = find_roots(lambda t: t, tol=1e-10)
        assert roots == pytest.approx([0.0], abs=1e-9)

    def test_refinement_tolerance(self):
        root = find_roots(lambda t: math.cos(3.0 * t) - 0.2, tol=1e-13)[0]
        assert abs(math.cos(3.0 * root) - 0.2) < 1e-10

    def test_custom_interval(self):
        roots = find_roots(lambda t: t - 2.0, 0.0, 4.0)
        assert roots == pytest.approx([2.0], abs=1e-9)


class TestRk4Flow:
    def test_constant_field_exact(self):
        final = rk4_flow(lambda x: np.array([1.0]), np.array([0.0]), 1.0, 0.25)
        assert float(final[0]) == 1.0
        final = rk4_flow(lambda x: np.array([1.0]), np.array([0.0]), 1.0, 0.1)
        assert float(final[0]) == pytest.approx(1.0, abs=1e-15)

    def test_rotation_accuracy(self):
        def rot(x):
            return np.array([-x[1], x[0]])

        final = rk4_flow(rot, np.array([1.0, 0.0]), TWO_PI, TWO_PI / 1000.0)
        assert abs(final[0] - 1.0) < 1e-9
        assert abs(final[1]) < 1e-9

    def test_fourth_order_convergence(self):
        def rot(x):
            return np.array([-x[1], x[0]])

        x0 = np.array([1.0, 0.0])
        err = []
        for steps in (200, 400):
            final = rk4_flow(rot, x0, TWO_PI, TWO_PI / steps)
            err.append(np.linalg.norm(final - x0))
        assert err[0] / err[1] >= 14.0

    def test_torus_field_preserves_t_exactly(self):
        def field(x):
            return np.array([math.sin(x[2]) + 1.5, math.cos(x[2]), 0.0])

        x0 = np.array([0.1, 0.2, 0.7310987])
        final = rk4_flow(field, x0, 5.0, 0.01)
        assert final[2] == x0[2]

    def test_angles_left_unreduced(self):
        def field(x):
            return np.array([1.0, 0.0, 0.0])

        final = rk4_flow(field, np.array([0.0, 0.0, 0.5]), 10.0, 0.1)
        assert final[0] == pytest.approx(10.0)

    def test_trajectory_recording(self):
        final, traj = rk4_flow(lambda x: np.array([1.0]), np.array([0.0]),
                               1.0, 0.25, record=True)
        assert traj.shape == (5, 1)
        assert traj[-1][0] == final[0]

    def test_nonfinite_velocity_raises(self):
        def bad(x):
            return np.array([math.inf])

        with pytest.raises(EvaluationError):
            rk4_flow(bad, np.array([0.0]), 1.0, 0.5)

    def test_invalid_step(self):
        with pytest.raises(ValueError):
            rk4_flow(lambda x: x, np.array([1.0]), 1.0, 0.0)


class TestDerivativeCheck:
    def test_constant(self):
        assert derivative_check(constant(3.0)) <= 1e-9

    def test_quadratic_exact_for_centered_difference(self):
        fn = polynomial([0.0, 0.0, 1.0])
        assert derivative_check(fn, 101, 1e-5) <= 1e-8

    def test_planted_wrong_derivative(self):
        wrong = ScalarFn(eval=lambda t: t * t, deriv=lambda t: 3.0 * t,
                         family="poly")
        mismatch = derivative_check(wrong, 101, 1e-5)
        assert 0.9 <= mismatch <= 1.1

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            derivative_check(constant(1.0), grid_size=1)
        with pytest.raises(ValueError):
            derivative_check(constant(1.0), h=1e-2)


class TestScalarFnFamilies:
    FAMILIES = {
        "constant": (constant(2.5), 0.0),
        "affine": (affine(1.0, -2.0), 0.0),
        "sinusoid": (sinusoid(1.5, 2, 0.3, 0.25), 1.5 * (2 * math.pi) ** 3),
        "poly": (polynomial([0.5, -1.0, 2.0, 0.5]), 3.0),
    }

    @pytest.mark.parametrize("name", sorted(FAMILIES))
    def test_scalar_and_array_eval_agree(self, name):
        fn, _ = self.FAMILIES[name]
        grid = np.linspace(0.0, 1.0, 17)
        vec = np.asarray(fn.eval(grid), dtype=float)
        for i, t in enumerate(grid):
            assert vec[i] == pytest.approx(float(fn.eval(float(t))), abs=1e-14)
        dvec = np.asarray(fn.deriv(grid), dtype=float)
        for i, t in enumerate(grid):
            assert dvec[i] == pytest.approx(float(fn.deriv(float(t))), abs=1e-14)

    @pytest.mark.parametrize("name", sorted(FAMILIES))
    def test_deriv_matches_centered_difference(self, name):
        # mismatch bound: 10 * h^2 * (third-derivative scale) plus rounding
        fn, third = self.FAMILIES[name]
        h = 1e-5
        bound = 10.0 * h * h * third + 1e-9
        assert derivative_check(fn, 101, h) <= bound

    def test_piecewise_linear_eval_and_slopes(self):
        fn = piecewise_linear([0.0, 0.25, 1.0], [1.0, 0.0, 3.0])
        assert fn.eval(0.125) == pytest.approx(0.5)
        assert fn.eval(0.625) == pytest.approx(1.5)
        assert fn.deriv(0.1) == pytest.approx(-4.0)
        assert fn.deriv(0.5) == pytest.approx(4.0)
        assert fn.breakpoints == (0.25,)
        grid = np.array([0.125, 0.625])
        assert np.allclose(fn.eval(grid), [0.5, 1.5])

    def test_piecewise_linear_validation(self):
        with pytest.raises(ValueError):
            piecewise_linear([0.0, 0.0, 1.0], [1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            piecewise_linear([0.0, 1.0], [1.0])

    def test_lincomb(self):
        fn = lincomb(2.0, constant(1.0), -1.0, polynomial([0.0, 1.0]))
        assert fn.eval(0.25) == pytest.approx(1.75)
        assert fn.deriv(0.25) == pytest.approx(-1.0)

    def test_sinusoid_frequency_convention(self):
        # frequency counts half-turns: 2 means sin(2 pi t)
        full = sinusoid(1.0, 2)
        assert full.eval(0.25) == pytest.approx(1.0)
        half = sinusoid(1.0, 1)
        assert half.eval(0.5) == pytest.approx(1.0)


class TestSerialization:
    CASES = [
        {"family": "constant", "params": [2.0]},
        {"family": "affine", "params": [1.0, -0.5]},
        {"family": "sinusoid", "params": [1.5, 2.0, 0.1, 0.25]},
        {"family": "poly", "params": [0.0, 1.0, -2.0]},
        {"family": "pwl", "params": [0.0, 1.0, 0.5, -1.0, 1.0, 2.0]},
    ]

    @pytest.mark.parametrize("spec", CASES, ids=lambda s: s["family"])
    def test_round_trip(self, spec):
        fn = scalarfn_from_spec(spec)
        again = scalarfn_from_spec(scalarfn_to_spec(fn))
        grid = np.linspace(0.0, 1.0, 33)
        assert np.allclose(np.asarray(fn.eval(grid)),
                           np.asarray(again.eval(grid)), atol=0)

    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError):
            scalarfn_from_spec({"family": "fourier", "params": []})

    def test_derived_functions_not_serializable(self):
        fn = lincomb(1.0, constant(1.0), 1.0, constant(2.0))
        with pytest.raises(ValueError):
            scalarfn_to_spec(fn)


class TestAntiderivative:
    def test_sine_antiderivative_values(self):
        F = antiderivative(sinusoid(1.0, 1))  # integral of sin(pi t)
        assert F.eval(0.0) == 0.0
        assert F.eval(1.0) == pytest.approx(2.0 / math.pi, abs=1e-12)
        assert F.eval(0.37) == pytest.approx((1 - math.cos(math.pi * 0.37)) / math.pi,
                                             abs=1e-12)

    def test_derivative_is_original_function(self):
        fn = polynomial([1.0, 2.0, 3.0])
        F = antiderivative(fn)
        for t in (0.0, 0.3, 0.99):
            assert F.deriv(t) == fn.eval(t)

    def test_finite_difference_round_trip(self):
        fn = sinusoid(1.0, 2)
        F = antiderivative(fn)
        h = 1e-5
        for t in np.linspace(2 * h, 1.0 - 2 * h, 23):
            fd = (F.eval(t + h) - F.eval(t - h)) / (2.0 * h)
            assert abs(fd - fn.eval(t)) < 1e-8

    def test_piecewise_linear_antiderivative(self):
        fn = piecewise_linear([0.0, 0.5, 1.0], [0.0, 1.0, 0.0])
        F = antiderivative(fn)
        assert F.eval(0.5) == pytest.approx(0.25, abs=1e-12)
        assert F.eval(1.0) == pytest.approx(0.5, abs=1e-12)
        # evaluation inside a panel containing the kink; slope is -2 past it
        d = 0.0004882
        assert F.eval(0.5 + d) == pytest.approx(0.25 + d - d * d, abs=1e-10)

    def test_array_evaluation(self):
        F = antiderivative(constant(2.0))
        grid = np.array([0.0, 0.25, 1.0])
        assert np.allclose(F.eval(grid), [0.0, 0.5, 2.0], atol=1e-13)


class TestRngStream:
    def test_bitwise_reproducibility(self):
        a = RngStream(1234, 5).generator().random(100_000)
        b = RngStream(1234, 5).generator().random(100_000)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ_and_decorrelate(self):
        a = RngStream(1234, 0).generator().random(100_000)
        b = RngStream(1234, 1).generator().random(100_000)
        assert not np.array_equal(a, b)
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) < 0.01

    def test_seed_changes_sequence(self):
        a = RngStream(1, 0).generator().random(1000)
        b = RngStream(2, 0).generator().random(1000)
        assert not np.array_equal(a, b)

    def test_copies_are_equivalent(self):
        s = RngStream(99, 3)
        t = RngStream(99, 3)
        assert np.array_equal(s.generator().random(64), t.generator().random(64))

    def test_substream_derivation(self):
        s = RngStream(7, 0)
        assert s.substream(1) != s
        assert s.substream(1) == s.substream(1)
