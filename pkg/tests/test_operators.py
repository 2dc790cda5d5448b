import math

import numpy as np
import pytest

from orlipde import (
    EllipticOperator,
    GridDomain,
    GridFunction,
    MultiIndex,
    NotEllipticError,
    bilaplacian,
    characteristic_form,
    coefficient_continuity_check,
    diff,
    ellipticity_check,
    freeze_leading,
    laplacian,
    multi_indices,
    power,
    sobolev_norms,
)


class TestMultiIndex:
    def test_order(self):
        assert MultiIndex((2, 1)).order == 3

    def test_enumeration(self):
        idx = multi_indices(2, 2)
        assert len(idx) == 6
        assert MultiIndex((1, 1)) in idx

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            MultiIndex((-1, 0))


class TestApply:
    def test_laplacian_eigenfunction(self, square64):
        L = laplacian(2)
        u = GridFunction.from_callable(
            square64, lambda x, y: np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)
        )
        lam = 2 * (2 * np.pi) ** 2
        err = np.max(np.abs(L.apply(u).values - lam * u.values)) / lam
        assert err < (1.0 / 64) ** 2 * 50

    def test_zero_order_term(self, square64):
        L = EllipticOperator(2, 2, {(2, 0): -1.0, (0, 2): -1.0, (0, 0): 3.0})
        u = GridFunction.from_callable(square64, lambda x, y: np.cos(2 * np.pi * y))
        out = L.apply(u).values
        expect = (2 * np.pi) ** 2 * u.values + 3.0 * u.values
        assert np.max(np.abs(out - expect)) / np.max(np.abs(expect)) < 1e-2

    def test_bilaplacian_fourth_derivative(self, square64):
        B = bilaplacian(2)
        u = GridFunction.from_callable(square64, lambda x, y: np.sin(2 * np.pi * x))
        lam = (2 * np.pi) ** 4
        err = np.max(np.abs(B.apply(u).values - lam * u.values)) / lam
        assert err < 5e-3

    def test_linearity(self, square32):
        rng = np.random.default_rng(0)
        L = laplacian(2)
        u = GridFunction(square32, rng.standard_normal(square32.shape))
        v = GridFunction(square32, rng.standard_normal(square32.shape))
        lhs = L.apply(u * 2.0 + v * (-3.0)).values
        rhs = 2.0 * L.apply(u).values - 3.0 * L.apply(v).values
        scale = np.max(np.abs(rhs))
        assert np.max(np.abs(lhs - rhs)) < 1e-12 * scale

    def test_resolution_guard(self):
        dom = GridDomain(2, 8, 1.0)
        u = GridFunction.zeros(dom)
        with pytest.raises(ValueError):
            bilaplacian(2).apply(u)

    def test_frozen_annihilates_low_degree_polynomials(self):
        # stencil exactness on the interior, away from the periodic seam
        dom = GridDomain(1, 64, 2.0)
        L0 = freeze_leading(laplacian(1), [0.0])
        u = GridFunction.from_callable(dom, lambda x: 0.7 + 0.3 * x)
        out = L0.apply(u).values
        x = dom.node_grids()[0]
        interior = np.abs(x) < 0.7
        assert np.max(np.abs(out[interior])) < 1e-10


class TestCharacteristicForm:
    def test_negative_laplacian(self):
        L = laplacian(2)
        eta = np.array([0.6, -0.8])
        assert characteristic_form(L, [0, 0], eta) == pytest.approx(-1.0)

    def test_homogeneity_degree_m(self):
        rng = np.random.default_rng(1)
        B = bilaplacian(2)
        eta = rng.standard_normal(2)
        q1 = characteristic_form(B, [0, 0], eta)
        q2 = characteristic_form(B, [0, 0], 2 * eta)
        assert q2 == pytest.approx(2**4 * q1, rel=1e-12)

    def test_bilaplacian_axis_value(self):
        assert characteristic_form(bilaplacian(2), [0, 0], [1.0, 0.0]) == pytest.approx(1.0)


class TestEllipticity:
    def test_positive_form_passes(self):
        rep = ellipticity_check(laplacian(2), [[0.0, 0.0]])
        assert rep.passed and not rep.sign_flipped
        assert rep.ratio == pytest.approx(1.0, abs=1e-12)

    def test_flipped_form_normalized(self):
        rep = ellipticity_check(laplacian(2, sign=+1.0), [[0.0, 0.0]])
        assert rep.passed and rep.sign_flipped

    def test_wave_operator_rejected(self):
        L = EllipticOperator(2, 2, {(2, 0): 1.0, (0, 2): -1.0})
        with pytest.raises(NotEllipticError):
            ellipticity_check(L, [[0.0, 0.0]])

    def test_direction_scale_invariance(self):
        from orlipde.operators import unit_directions

        L = EllipticOperator(2, 2, {(2, 0): -2.0, (0, 2): -1.0, (1, 1): -0.5})
        dirs = unit_directions(2, 64)
        r1 = ellipticity_check(L, [[0.0, 0.0]], dirs)
        r2 = ellipticity_check(L, [[0.0, 0.0]], 3.0 * dirs)
        assert r1.sign_flipped == r2.sign_flipped
        assert r1.ratio == pytest.approx(r2.ratio, rel=1e-12)


class TestFreeze:
    def test_variable_coefficient_at_origin(self):
        c = lambda x, y: -(1.0 + 0.1 * (x**2 + y**2))
        L = EllipticOperator(2, 2, {(2, 0): c, (0, 2): c, (0, 0): -1.0})
        F = freeze_leading(L, [0.0, 0.0])
        assert F.is_constant()
        assert F.coeffs[MultiIndex((2, 0))] == pytest.approx(-1.0)
        assert MultiIndex((0, 0)) not in F.coeffs

    def test_idempotent(self):
        L = EllipticOperator(2, 2, {(2, 0): -2.0, (0, 2): -1.0})
        F1 = freeze_leading(L, [0.3, 0.1])
        F2 = freeze_leading(F1, [0.3, 0.1])
        assert F1.coeffs == F2.coeffs


class TestCoefficientContinuity:
    def test_lipschitz_passes(self):
        L = EllipticOperator(1, 2, {(2,): lambda x: 1.0 + x})
        rep = coefficient_continuity_check(L, [0.0], [0.4, 0.2, 0.1, 0.05])
        assert rep.passed
        oscs = [row.oscillation for row in rep.rows]
        assert oscs[-1] == pytest.approx(0.05, rel=0.05)

    def test_jump_fails(self):
        L = EllipticOperator(1, 2, {(2,): lambda x: np.sign(x)})
        rep = coefficient_continuity_check(L, [0.0], [0.4, 0.2, 0.1])
        assert not rep.passed
        oscs = [row.oscillation for row in rep.rows]
        assert max(oscs) == min(oscs)

    def test_root_modulus_passes(self):
        # continuous but not Lipschitz: oscillation decays like sqrt(r)
        L = EllipticOperator(1, 2, {(2,): lambda x: 1.0 + np.sqrt(np.abs(x))})
        rep = coefficient_continuity_check(L, [0.0], [0.4, 0.2, 0.1, 0.05])
        assert rep.passed
        oscs = [row.oscillation for row in rep.rows]
        assert oscs[-1] == pytest.approx(math.sqrt(0.05), rel=0.05)

    def test_radii_must_decrease(self):
        L = laplacian(1)
        with pytest.raises(ValueError):
            coefficient_continuity_check(L, [0.0], [0.1, 0.2])


class TestSobolevNorms:
    def test_constant_function(self, square32):
        u = GridFunction.from_callable(square32, lambda x, y: np.full_like(x, 2.0))
        sn = sobolev_norms(u, 2, power(2), d_omega=0.7)
        assert sn.plain == pytest.approx(sn.per_index[MultiIndex((0, 0))])
        assert sn.weighted == pytest.approx(sn.plain)

    def test_unit_weight_collapses(self, square32, bump):
        u = bump(square32, 0.3)
        sn = sobolev_norms(u, 2, power(2), d_omega=1.0)
        assert sn.plain == sn.weighted

    def test_sine_channels(self):
        dom = GridDomain(1, 128, 2.0)
        u = GridFunction.from_callable(dom, lambda x: np.sin(np.pi * x))
        sn = sobolev_norms(u, 2, power(2), d_omega=1.0)
        w = math.pi
        base = 1.0  # L2 norm of sin(pi x) over one period of length 2
        for k, expect in ((0, base), (1, w * base), (2, w**2 * base)):
            got = sn.per_index[MultiIndex((k,))]
            assert got == pytest.approx(expect, rel=5e-3)

    def test_weight_bracket(self, square32, bump):
        u = bump(square32, 0.3)
        for d_omega in (0.3, 1.0, 2.5):
            sn = sobolev_norms(u, 2, power(2), d_omega=d_omega)
            lo = min(1.0, d_omega**2) * sn.plain
            hi = max(1.0, d_omega**2) * sn.plain
            assert lo * (1 - 1e-12) <= sn.weighted <= hi * (1 + 1e-12)


class TestDiff:
    def test_first_derivative_of_sine(self, line64):
        u = GridFunction.from_callable(line64, lambda x: np.sin(np.pi * x))
        du = diff(u, (1,))
        ref = math.pi * np.cos(np.pi * line64.node_grids()[0])
        # second-order stencil: error bounded by (pi h)^2 pi / 6
        assert np.max(np.abs(du.values - ref)) < (math.pi * line64.h) ** 2 * math.pi / 5

    def test_order_guard(self, line64):
        u = GridFunction.zeros(line64)
        with pytest.raises(ValueError):
            diff(u, (5,))
