import math

import numpy as np
import pytest

from orlipde import (
    GridDomain,
    GridFunction,
    ShiftVector,
    characteristic_norm_value,
    convolve,
    dual_norm_lower_bound,
    exp_young,
    inequality_suite,
    l1_norm,
    luxemburg_norm,
    modular,
    mollify,
    orlicz_norm,
    power,
    shift,
    shift_modulus,
)


def interval_indicator(domain, a, b):
    x = domain.node_grids()[0]
    return GridFunction(domain, np.where((x >= a) & (x < b), 1.0, 0.0))


class TestModular:
    def test_constant(self, line64):
        x = line64.node_grids()[0]
        dom = line64.with_mask((x >= 0) & (x < 1))
        u = GridFunction.from_callable(dom, lambda x: np.full_like(x, 3.0), restrict=True)
        assert modular(u, power(2)) == pytest.approx(9.0 * 1.0)

    def test_zero(self, line64):
        assert modular(GridFunction.zeros(line64), power(2)) == 0.0

    def test_midpoint_convergence(self):
        # integral of x^2 over [0, 1] with second-order accuracy
        errs = []
        for N in (32, 64, 128):
            dom = GridDomain(1, N, 2.0)
            x = dom.node_grids()[0]
            dom = dom.with_mask((x >= 0) & (x < 1))
            u = GridFunction.from_callable(dom, lambda x: x, restrict=True)
            errs.append(abs(modular(u, power(2)) - 1.0 / 3.0))
        assert errs[0] < (2.0 / 32) ** 2
        assert errs[0] / errs[1] > 3.5
        assert errs[1] / errs[2] > 3.5

    def test_overflow_sentinel(self, line64):
        u = GridFunction.from_callable(line64, lambda x: np.full_like(x, 800.0))
        assert modular(u, exp_young()) == math.inf


class TestLuxemburg:
    def test_power_is_pnorm(self, line64):
        rng = np.random.default_rng(0)
        for p in (1.5, 2.0, 3.0):
            u = GridFunction(line64, rng.standard_normal(64))
            pn = (np.sum(np.abs(u.values) ** p) * line64.cell_volume) ** (1.0 / p)
            assert abs(luxemburg_norm(u, power(p)) - pn) <= 1e-10 * pn

    def test_constant_on_cube(self, line64):
        u = GridFunction.from_callable(line64, lambda x: np.ones_like(x))
        assert luxemburg_norm(u, power(2)) == pytest.approx(math.sqrt(2.0), rel=1e-11)

    def test_indicator_gauge(self, line64):
        # gauge of an indicator is 1 / Minv(1 / measure)
        u = interval_indicator(line64, 0.0, 0.25)
        assert luxemburg_norm(u, power(2)) == pytest.approx(0.5, rel=1e-10)

    def test_zero(self, line64):
        assert luxemburg_norm(GridFunction.zeros(line64), power(2)) == 0.0

    def test_homogeneity(self, line64):
        rng = np.random.default_rng(1)
        u = GridFunction(line64, rng.standard_normal(64))
        M = power(2.5)
        base = luxemburg_norm(u, M)
        for c in (-2.0, 0.5, 10.0):
            assert luxemburg_norm(u * c, M) == pytest.approx(abs(c) * base, rel=1e-8)

    def test_triangle(self, line64):
        rng = np.random.default_rng(2)
        M = power(3)
        for _ in range(5):
            u = GridFunction(line64, rng.standard_normal(64))
            v = GridFunction(line64, rng.standard_normal(64))
            assert luxemburg_norm(u + v, M) <= (
                luxemburg_norm(u, M) + luxemburg_norm(v, M) + 1e-8
            )


class TestOrlicz:
    def test_characteristic_norm_formula(self, line64):
        # quadratic pair: mes E = 0.5 gives dual norm mes * Ninv(1/mes) = 1
        M = power(2, coeff=0.5)
        u = interval_indicator(line64, 0.0, 0.5)
        formula = characteristic_norm_value(M, 0.5)
        assert formula == pytest.approx(1.0, rel=1e-9)
        assert orlicz_norm(u, M) == pytest.approx(formula, rel=1e-8)

    def test_gauge_dual_bracket(self, line64):
        rng = np.random.default_rng(3)
        M = power(2)
        for _ in range(10):
            u = GridFunction(line64, rng.standard_normal(64))
            lux = luxemburg_norm(u, M)
            orl = orlicz_norm(u, M)
            assert lux <= orl * (1 + 1e-9)
            assert orl <= 2 * lux * (1 + 1e-9)

    def test_zero(self, line64):
        assert orlicz_norm(GridFunction.zeros(line64), power(2)) == 0.0


class TestDualLowerBound:
    def test_below_dual_norm(self, line64):
        rng = np.random.default_rng(4)
        M = power(2, coeff=0.5)
        for seed in range(4):
            u = GridFunction(line64, rng.standard_normal(64))
            bound = dual_norm_lower_bound(u, M, trials=8, seed=seed)
            assert bound <= orlicz_norm(u, M) * (1 + 1e-6)

    def test_indicator_witness_is_sharp(self, line64):
        M = power(2, coeff=0.5)
        u = interval_indicator(line64, 0.0, 0.5)
        bound = dual_norm_lower_bound(u, M, trials=4, seed=0)
        assert bound == pytest.approx(orlicz_norm(u, M), rel=1e-6)

    def test_zero(self, line64):
        assert dual_norm_lower_bound(GridFunction.zeros(line64), power(2), 3) == 0.0


class TestShiftDiagnostics:
    def test_lattice_shift_invariance(self, line64):
        rng = np.random.default_rng(5)
        u = GridFunction(line64, rng.standard_normal(64))
        M = power(2.5)
        base = luxemburg_norm(u, M)
        moved = luxemburg_norm(shift(u, ShiftVector.from_cells(line64, [7])), M)
        assert moved == base

    def test_modulus_zero_row(self, line64, bump):
        f = bump(line64, 0.4)
        rows = shift_modulus(f, power(2), [ShiftVector.of(0.0)])
        assert rows[0] == (0.0, 0.0)

    def test_smooth_modulus_linear_decay(self, line64, bump):
        f = bump(line64, 0.5)
        cells = [16, 8, 4, 2, 1]
        rows = shift_modulus(
            f, power(2), [ShiftVector.from_cells(line64, [c]) for c in cells]
        )
        mags = np.array([r[0] for r in rows])
        mods = np.array([r[1] for r in rows])
        assert np.all(np.diff(mods) < 0)
        # bounded by a gradient-scale multiple of the displacement
        grad_scale = np.max(np.abs(np.gradient(f.values, line64.h)))
        assert np.all(mods <= grad_scale * mags * math.sqrt(line64.d))

    def test_indicator_modulus_sqrt_scaling(self, line64):
        u = interval_indicator(line64, -0.5, 0.5)
        cells = [16, 4, 1]
        rows = shift_modulus(
            u, power(2), [ShiftVector.from_cells(line64, [c]) for c in cells]
        )
        # symmetric difference has measure 2 delta; the gauge scales as its root
        for (mag, mod) in rows:
            assert mod == pytest.approx(math.sqrt(2 * mag), rel=1e-6)


class TestMollify:
    def test_constant_preserved(self, square32):
        f = GridFunction.from_callable(square32, lambda x, y: np.full_like(x, 2.5))
        out = mollify(f, 0.2)
        assert np.max(np.abs(out.values - 2.5)) < 1e-12

    def test_gauge_convergence(self, line64, bump):
        f = bump(line64, 0.5)
        M = power(2)
        errs = [luxemburg_norm(mollify(f, eps) - f, M) for eps in (0.4, 0.2, 0.1)]
        assert errs[0] > errs[1] > errs[2]

    def test_smooths_indicator(self, line64):
        u = interval_indicator(line64, -0.5, 0.5)
        out = mollify(u, 0.2)
        jump = np.max(np.abs(np.diff(out.values)))
        assert jump < 0.5 * np.max(np.abs(np.diff(u.values)))


class TestInequalitySuite:
    def test_zero_input(self, line64):
        rep = inequality_suite(GridFunction.zeros(line64), GridFunction.zeros(line64), power(2))
        assert rep.all_pass
        assert all(r.lhs == 0.0 for r in rep.rows)

    def test_unit_mass_smoothing(self, line64, bump):
        f = bump(line64, 0.6)
        M = power(2)
        ker = mollify(f, 0.2)  # exercised through the suite bound below
        g = GridFunction(line64, np.abs(np.random.default_rng(6).standard_normal(64)))
        g = g * (1.0 / l1_norm(g))
        conv = convolve(f, g)
        assert luxemburg_norm(conv, M) <= luxemburg_norm(f, M) * (1 + 1e-9)

    def test_indicator_pair(self, line64):
        chi = interval_indicator(line64, 0.0, 1.0)
        rep = inequality_suite(chi, chi, power(2))
        assert rep.all_pass
        row = {r.name: r for r in rep.rows}["holder_sup_bound"]
        assert row.lhs == pytest.approx(1.0, abs=1e-12)

    def test_random_fields_pass(self, line64, square32):
        rng = np.random.default_rng(7)
        for seed in range(6):
            dom = line64 if seed % 2 == 0 else square32
            f = GridFunction(dom, rng.standard_normal(dom.shape))
            g = GridFunction(dom, rng.standard_normal(dom.shape))
            M = power(1.5 + seed / 4.0)
            rep = inequality_suite(f, g, M, seed=seed)
            assert rep.all_pass, [
                (r.name, r.lhs, r.rhs) for r in rep.violations()
            ]
