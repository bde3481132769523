"""Building blocks: profiles, Lutz pairs, fields, sewing, torus changes."""

import math

import numpy as np
import pytest

from fiberflux.blocks import (
    BlockA,
    BlockB,
    BoundaryRecord,
    Jet,
    LutzPair,
    Profile,
    block_a_field,
    block_c_field,
    lutz_valid,
    profile_from_spec,
    profile_to_spec,
    sew_lutz,
    transform_torus,
    wronskian_fn,
)
from fiberflux.core import (
    affine,
    constant,
    piecewise_linear,
    polynomial,
    sinusoid,
)
from fiberflux.errors import (
    DegenerateJetError,
    NotTorusAutomorphismError,
    SingularCoreError,
    SingularFieldError,
    UnsewableError,
)

TWO_PI = 2.0 * math.pi


class TestProfile:
    def test_valid_profile(self):
        Profile(f=constant(1.0), g=constant(0.0))

    def test_simultaneous_zero_rejected_with_location(self):
        with pytest.raises(SingularFieldError) as err:
            Profile(f=polynomial([0.0, 1.0]), g=constant(0.0))
        assert err.value.t == pytest.approx(0.0)

    def test_interior_zero_rejected(self):
        with pytest.raises(SingularFieldError) as err:
            Profile(f=affine(-0.5, 1.0), g=affine(-0.5, 1.0))
        assert err.value.t == pytest.approx(0.5)

    def test_serialization_round_trip(self):
        spec = {"f": {"family": "sinusoid", "params": [1.0, 2.0, 0.0, 0.0]},
                "g": {"family": "constant", "params": [1.0]}}
        profile = profile_from_spec(spec)
        again = profile_to_spec(profile)
        assert again["f"]["family"] == "sinusoid"
        assert again["g"]["params"] == [1.0]

    def test_serialization_needs_both_components(self):
        with pytest.raises(ValueError):
            profile_from_spec({"f": {"family": "constant", "params": [1.0]}})


class TestLutzValid:
    def test_rotating_pair_constant_wronskian(self):
        pair = LutzPair(p=sinusoid(1.0, 2, math.pi / 2.0),  # cos(2 pi t)
                        q=sinusoid(1.0, 2))                  # sin(2 pi t)
        w = wronskian_fn(pair)
        assert w(0.3) == pytest.approx(-TWO_PI, abs=1e-12)
        report = lutz_valid(pair)
        assert report.is_valid
        assert report.sign == -1
        assert report.min_abs_wronskian == pytest.approx(TWO_PI, rel=1e-9)

    def test_proportional_pair_invalid(self):
        pair = LutzPair(p=polynomial([0.0, 1.0]), q=polynomial([0.0, 1.0]))
        report = lutz_valid(pair)
        assert not report.is_valid
        assert report.min_abs_wronskian == pytest.approx(0.0, abs=1e-12)

    def test_one_t_pair(self):
        pair = LutzPair(p=constant(1.0), q=polynomial([0.0, 1.0]))
        report = lutz_valid(pair)
        assert report.is_valid
        assert report.sign == -1
        assert report.min_abs_wronskian == pytest.approx(1.0, abs=1e-12)

    def test_sign_change_invalid(self):
        # W = p'q - q'p = (t - 0.5) choosing p = 1, q = antiderivative-ish
        pair = LutzPair(p=constant(1.0),
                        q=polynomial([0.0, -0.5, 0.5]))
        report = lutz_valid(pair)
        assert not report.is_valid


class TestBlockCField:
    def test_constant_profile(self):
        field = block_c_field(Profile(f=constant(1.0), g=constant(0.0)))
        assert field.F.eval(0.25) == pytest.approx(0.25, abs=1e-13)
        assert field.F.eval(1.0) == pytest.approx(1.0, abs=1e-13)
        assert field.G.eval(0.7) == 0.0
        v = field.velocity(np.array([0.1, 0.2, 0.5]))
        assert v == pytest.approx([1.0, 0.0, 0.0])

    def test_sine_family_antiderivatives(self):
        a, Q, b = 1.0, 2.0, 4.0
        field = block_c_field(Profile(f=constant(a),
                                      g=sinusoid(Q, 1, 0.0, b)))
        for t in np.linspace(0.0, 1.0, 21):
            t = float(t)
            assert field.F.eval(t) == pytest.approx(a * t, abs=1e-12)
            expected = Q * (1.0 - math.cos(math.pi * t)) / math.pi + b * t
            assert field.G.eval(t) == pytest.approx(expected, abs=1e-12)
        assert field.G.eval(1.0) == pytest.approx(2.0 * Q / math.pi + b,
                                                  abs=1e-12)

    def test_full_period_antiderivatives_vanish(self):
        field = block_c_field(Profile(f=sinusoid(1.0, 2),
                                      g=sinusoid(1.0, 2, math.pi / 2.0)))
        assert field.F.eval(1.0) == pytest.approx(0.0, abs=1e-12)
        assert field.G.eval(1.0) == pytest.approx(0.0, abs=1e-12)

    def test_primitive_pair_is_G_minus_F(self):
        field = block_c_field(Profile(f=constant(2.0), g=constant(3.0)))
        assert field.pair.p.eval(0.5) == pytest.approx(1.5, abs=1e-12)
        assert field.pair.q.eval(0.5) == pytest.approx(-1.0, abs=1e-12)

    def test_quadrature_derivative_round_trip(self):
        # d(G dx1 - F dx2) = iota_X Omega, checked as F' = f, G' = g by
        # centered differences of the quadrature antiderivatives
        profile = Profile(f=sinusoid(1.0, 2), g=polynomial([0.5, 1.0, -0.5]))
        field = block_c_field(profile)
        h = 1e-5
        for t in np.linspace(2 * h, 1.0 - 2 * h, 41):
            t = float(t)
            fd_f = (field.F.eval(t + h) - field.F.eval(t - h)) / (2 * h)
            fd_g = (field.G.eval(t + h) - field.G.eval(t - h)) / (2 * h)
            assert abs(fd_f - profile.f.eval(t)) < 1e-8
            assert abs(fd_g - profile.g.eval(t)) < 1e-8


class TestBlockA:
    def test_constant_phi_field(self):
        field = block_a_field(BlockA(phi=constant(1.0), R=1.0))
        for r in (0.0, 0.3, 1.0):
            v = field.velocity(np.array([0.0, r, 0.0]))
            assert v == pytest.approx([-2.0, 0.0, 0.0], abs=1e-9)

    def test_quadratic_phi_constant_twist(self):
        field = block_a_field(BlockA(phi=polynomial([0.0, 0.0, 1.0]), R=1.0))
        for r in (0.0, 0.25, 0.5, 1.0):
            assert field.psi_rate(r) == pytest.approx(2.0, abs=1e-6)

    def test_quadratic_phi_fails_boundary_condition(self):
        block = BlockA(phi=polynomial([0.0, 0.0, 1.0]), R=1.0)
        issues = block.validate()
        assert any("phi' = (2/r) phi" in msg for msg in issues)
        report = lutz_valid(block.boundary_pair(), a=0.5, b=1.0)
        assert not report.is_valid

    def test_well_formed_block_validates(self):
        block = BlockA(phi=constant(1.0), R=0.5)
        assert block.validate() == []
        report = lutz_valid(block.boundary_pair(), a=0.25, b=0.5)
        assert report.is_valid

    def test_nonzero_core_slope_rejected(self):
        with pytest.raises(SingularCoreError):
            block_a_field(BlockA(phi=affine(1.0, 1.0), R=1.0))

    def test_radius_validation(self):
        with pytest.raises(ValueError):
            BlockA(phi=constant(1.0), R=0.0)

    def test_volume_preservation_by_finite_differences(self):
        # divergence w.r.t. r dr^dtheta^dpsi:
        # (1/r) * [d(r X_theta)/dtheta + d(r X_r)/dr + d(r X_psi)/dpsi]
        field = block_a_field(BlockA(phi=polynomial([1.0, 0.0, 0.5]), R=1.0))
        h = 1e-5

        def vel(theta, r, psi):
            return field.velocity(np.array([theta, r, psi]))

        worst = 0.0
        for r in np.linspace(1e-3, 1.0, 15):
            for theta in (0.0, 1.0):
                psi = 0.5
                d_theta = (r * vel(theta + h, r, psi)[0]
                           - r * vel(theta - h, r, psi)[0]) / (2 * h)
                d_r = ((r + h) * vel(theta, r + h, psi)[1]
                       - (r - h) * vel(theta, r - h, psi)[1]) / (2 * h)
                d_psi = (r * vel(theta, r, psi + h)[2]
                         - r * vel(theta, r, psi - h)[2]) / (2 * h)
                worst = max(worst, abs((d_theta + d_r + d_psi) / r))
        assert worst <= 1e-6


class TestBlockB:
    def test_three_boundaries_required(self):
        rec = BoundaryRecord(h=affine(0.25, 1.0), phi=constant(1.0))
        with pytest.raises(ValueError):
            BlockB(boundary_data=(rec, rec))

    def test_collar_conditions_checked(self):
        good = BoundaryRecord(h=affine(0.25, 1.0), phi=constant(1.0))
        bad = BoundaryRecord(h=affine(0.25, -1.0), phi=constant(1.0))
        block = BlockB(boundary_data=(good, good, bad))
        issues = block.validate()
        assert any("h' not strictly positive" in msg for msg in issues)

    def test_jet_extraction(self):
        rec = BoundaryRecord(h=affine(0.25, 1.0), phi=constant(1.0))
        jet = rec.jet()
        assert (jet.p, jet.q, jet.dp, jet.dq) == (1.0, 0.25, 0.0, 1.0)
        assert jet.wronskian == pytest.approx(-1.0)


class TestSewLutz:
    def test_quarter_turn(self):
        # both jets carry Wronskian +1
        result = sew_lutz((1.0, 0.0, 0.0, -1.0), (0.0, 1.0, 1.0, 0.0))
        report = lutz_valid(result.pair)
        assert report.is_valid
        assert report.sign == 1
        assert result.turns_added == 0

    def test_identical_jets_force_full_turn(self):
        result = sew_lutz((1.0, 0.0, 0.0, 1.0), (1.0, 0.0, 0.0, 1.0))
        assert abs(result.theta_total) == pytest.approx(TWO_PI)
        report = lutz_valid(result.pair)
        assert report.is_valid
        assert report.sign == -1

    def test_jet_matching(self):
        left = (0.5, -0.2, 0.3, -1.1)
        right = (-0.4, 0.8, 1.3, 0.9)
        # both Wronskians: left 0.3*(-0.2) - (-1.1)*0.5 = 0.49 > 0,
        # right 1.3*0.8 - 0.9*(-0.4) = 1.4 > 0
        result = sew_lutz(left, right)
        pair = result.pair
        assert pair.p.eval(0.0) == pytest.approx(left[0], abs=1e-8)
        assert pair.q.eval(0.0) == pytest.approx(left[1], abs=1e-8)
        assert pair.p.deriv(0.0) == pytest.approx(left[2], abs=1e-8)
        assert pair.q.deriv(0.0) == pytest.approx(left[3], abs=1e-8)
        assert pair.p.eval(1.0) == pytest.approx(right[0], abs=1e-8)
        assert pair.q.eval(1.0) == pytest.approx(right[1], abs=1e-8)
        assert pair.p.deriv(1.0) == pytest.approx(right[2], abs=1e-8)
        assert pair.q.deriv(1.0) == pytest.approx(right[3], abs=1e-8)

    def test_extra_turns_increase_sweep(self):
        base = sew_lutz((1.0, 0.0, 0.0, 1.0), (1.0, 0.0, 0.0, 1.0), 0)
        more = sew_lutz((1.0, 0.0, 0.0, 1.0), (1.0, 0.0, 0.0, 1.0), 2)
        assert abs(more.theta_total) == pytest.approx(
            abs(base.theta_total) + 2 * TWO_PI)
        assert lutz_valid(more.pair).is_valid

    def test_opposite_signs_unsewable(self):
        with pytest.raises(UnsewableError):
            sew_lutz((1.0, 0.0, 0.0, -1.0), (1.0, 0.0, 0.0, 1.0))

    def test_zero_wronskian_unsewable(self):
        with pytest.raises(UnsewableError):
            sew_lutz((1.0, 0.0, 0.0, 0.0), (0.0, 1.0, 1.0, 0.0))

    def test_degenerate_jet(self):
        with pytest.raises(DegenerateJetError):
            sew_lutz((0.0, 0.0, 1.0, 1.0), (0.0, 1.0, 1.0, 0.0))

    def test_negative_extra_turns(self):
        with pytest.raises(ValueError):
            sew_lutz((1.0, 0.0, 0.0, 1.0), (1.0, 0.0, 0.0, 1.0), -1)

    def test_random_compatible_jets(self):
        rng = np.random.default_rng(42)
        for case in range(50):
            sign = 1 if rng.random() < 0.5 else -1
            jets = []
            for _ in range(2):
                radius = rng.uniform(0.3, 2.0)
                theta = rng.uniform(0.0, TWO_PI)
                w = sign * rng.uniform(0.2, 3.0)
                rate = rng.uniform(-1.0, 1.0)
                turn = -w / radius ** 2
                c, s = math.cos(theta), math.sin(theta)
                jets.append(Jet(radius * c, radius * s,
                                rate * c - radius * turn * s,
                                rate * s + radius * turn * c))
            result = sew_lutz(jets[0], jets[1])
            report = lutz_valid(result.pair)
            assert report.is_valid, f"case {case}"
            assert report.sign == sign, f"case {case}"


class TestTransformTorus:
    def test_identity(self):
        profile = Profile(f=constant(2.0), g=constant(3.0))
        moved = transform_torus(profile, ((1, 0), (0, 1)))
        assert moved.f.eval(0.5) == pytest.approx(2.0)
        assert moved.g.eval(0.5) == pytest.approx(3.0)

    def test_swap_components(self):
        profile = Profile(f=constant(2.0), g=sinusoid(1.0, 2, 0.0, 3.0))
        moved = transform_torus(profile, ((0, 1), (1, 0)))
        assert moved.f.eval(0.25) == pytest.approx(4.0)
        assert moved.g.eval(0.25) == pytest.approx(2.0)

    def test_determinant_two_rejected(self):
        with pytest.raises(NotTorusAutomorphismError):
            transform_torus(Profile(f=constant(1.0), g=constant(0.0)),
                            ((1, 0), (0, 2)))

    def test_non_integer_rejected(self):
        with pytest.raises(NotTorusAutomorphismError):
            transform_torus(Profile(f=constant(1.0), g=constant(0.0)),
                            ((1.0, 0.5), (0.0, 1.0)))

    def test_round_trip_is_identity(self):
        profile = Profile(f=sinusoid(1.0, 2, 0.2, 0.5), g=constant(1.0))
        m = ((2, 1), (1, 1))
        minv = ((1, -1), (-1, 2))
        back = transform_torus(transform_torus(profile, m), minv)
        grid = np.linspace(0.0, 1.0, 33)
        assert np.allclose(np.asarray(back.f.eval(grid)),
                           np.asarray(profile.f.eval(grid)), atol=1e-14)
        assert np.allclose(np.asarray(back.g.eval(grid)),
                           np.asarray(profile.g.eval(grid)), atol=1e-14)

    @pytest.mark.parametrize("matrix", [
        ((1, 0), (0, 1)), ((0, 1), (1, 0)), ((1, 1), (0, 1)),
        ((2, 1), (1, 1)), ((0, 1), (-1, 0)),
    ])
    def test_lutz_validity_preserved(self, matrix):
        pair = LutzPair(p=sinusoid(1.0, 2, math.pi / 2.0), q=sinusoid(1.0, 2))
        moved = transform_torus(pair, matrix)
        report = lutz_valid(moved)
        assert report.is_valid
        assert report.min_abs_wronskian == pytest.approx(TWO_PI, rel=1e-9)

    def test_form_coefficients_use_inverse_transpose(self):
        # shear y1 = x1, y2 = 2 x1 + x2: dx1 = dy1 but dx2 = dy2 - 2 dy1,
        # keeping the pairing of forms with transformed vectors invariant
        dx1 = transform_torus(LutzPair(p=constant(1.0), q=constant(0.0)),
                              ((1, 0), (2, 1)))
        assert dx1.p.eval(0.5) == pytest.approx(1.0)
        assert dx1.q.eval(0.5) == pytest.approx(0.0)
        dx2 = transform_torus(LutzPair(p=constant(0.0), q=constant(1.0)),
                              ((1, 0), (2, 1)))
        assert dx2.p.eval(0.5) == pytest.approx(-2.0)
        assert dx2.q.eval(0.5) == pytest.approx(1.0)

    def test_unsupported_type(self):
        with pytest.raises(TypeError):
            transform_torus(3.0, ((1, 0), (0, 1)))
