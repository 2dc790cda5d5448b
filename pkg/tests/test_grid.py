import numpy as np
import pytest

from orlipde import (
    GridDomain,
    GridFunction,
    ResolutionError,
    ShiftVector,
    convolve,
    mollifier_kernel,
    read_grid_function,
    read_mask,
    shift,
    write_grid_function,
    write_mask,
)


class TestDomain:
    def test_cell_volume_covers_cube(self):
        dom = GridDomain(2, 32, 1.5)
        assert dom.cell_volume * dom.N**dom.n == pytest.approx(dom.d**dom.n)

    def test_minimum_resolution(self):
        with pytest.raises(ValueError):
            GridDomain(1, 3, 1.0)

    def test_mask_must_be_nonempty(self):
        with pytest.raises(ValueError):
            GridDomain(1, 8, 1.0, mask=np.zeros(8, dtype=bool))

    def test_nodes_are_cell_centers(self):
        dom = GridDomain(1, 8, 2.0)
        x = dom.axis_coords(0)
        assert x[0] == pytest.approx(-1.0 + dom.h / 2)
        assert np.allclose(np.diff(x), dom.h)

    def test_offset_lattice_origin(self):
        dom = GridDomain(2, 16, 1.0)
        offs = dom.offset_lattice()
        assert offs[0][0, 0] == 0.0 and offs[1][0, 0] == 0.0
        assert np.all(np.abs(offs[0]) <= dom.d / 2)

    def test_ball_mask_inside(self):
        dom = GridDomain(2, 32, 1.0)
        mask = dom.ball_mask([0.0, 0.0], 0.3)
        assert mask.any()
        with pytest.raises(ValueError):
            dom.ball_mask([0.4, 0.0], 0.2)

    def test_measure(self):
        dom = GridDomain(1, 64, 2.0)
        x = dom.node_grids()[0]
        assert dom.measure((x >= 0) & (x < 1)) == pytest.approx(1.0)


class TestShift:
    def test_zero_shift_identity(self, line64):
        f = GridFunction(line64, np.random.default_rng(0).standard_normal(64))
        out = shift(f, ShiftVector.of(0.0))
        assert np.array_equal(out.values, f.values)

    def test_full_period_identity(self, line64):
        f = GridFunction(line64, np.random.default_rng(1).standard_normal(64))
        out = shift(f, ShiftVector.of(line64.d))
        assert np.array_equal(out.values, f.values)

    def test_lattice_shift_is_roll(self, line64):
        f = GridFunction(line64, np.arange(64.0))
        out = shift(f, ShiftVector.from_cells(line64, [3]))
        assert np.array_equal(out.values, np.roll(np.arange(64.0), -3))

    def test_off_lattice_warns_and_interpolates(self, line64):
        f = GridFunction.from_callable(line64, lambda x: np.sin(np.pi * x))
        with pytest.warns(UserWarning, match="off-lattice"):
            out = shift(f, ShiftVector.of(0.5 * line64.h))
        mid = 0.5 * (f.values + np.roll(f.values, -1))
        assert np.allclose(out.values, mid)

    def test_periodic_index_arithmetic(self, line64):
        f = GridFunction(line64, np.random.default_rng(2).standard_normal(64))
        s1 = shift(f, ShiftVector.from_cells(line64, [64 + 5]))
        s2 = shift(f, ShiftVector.from_cells(line64, [5]))
        assert np.array_equal(s1.values, s2.values)


class TestConvolve:
    def test_indicator_hat(self, line64):
        x = line64.node_grids()[0]
        chi = GridFunction(line64, np.where((x >= 0) & (x < 1), 1.0, 0.0))
        conv = convolve(chi, chi)
        # triangular profile with exact unit peak at lattice offset distance
        k_star = int(np.argmax(conv.values))
        assert conv.values[k_star] == pytest.approx(1.0, abs=1e-12)
        z_peak = line64.offset_lattice()[0][k_star]
        assert min(abs(abs(z_peak) - 1.0), abs(z_peak - 1.0)) <= line64.h
        m = np.arange(64)
        dist = np.minimum((m - k_star) % 64, (k_star - m) % 64)
        ref = np.maximum(0.0, 1.0 - line64.h * dist)
        assert np.max(np.abs(conv.values - ref)) < 1e-12

    def test_commutative_bit_exact(self, square32):
        rng = np.random.default_rng(3)
        f = GridFunction(square32, rng.standard_normal(square32.shape))
        g = GridFunction(square32, rng.standard_normal(square32.shape))
        assert np.array_equal(convolve(f, g).values, convolve(g, f).values)

    def test_bilinear(self, line64):
        rng = np.random.default_rng(4)
        f1 = GridFunction(line64, rng.standard_normal(64))
        f2 = GridFunction(line64, rng.standard_normal(64))
        g = GridFunction(line64, rng.standard_normal(64))
        lhs = convolve(f1 * 2.0 + f2 * (-0.5), g).values
        rhs = 2.0 * convolve(f1, g).values - 0.5 * convolve(f2, g).values
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_cosine_eigenpair(self, line64):
        # convolving a pure mode with itself keeps the mode, scaled by d/2
        f = GridFunction.from_callable(line64, lambda x: np.cos(np.pi * x))
        conv = convolve(f, f)
        assert np.max(np.abs(conv.values)) == pytest.approx(1.0, rel=1e-10)

    def test_geometry_mismatch(self, line64):
        other = GridDomain(1, 32, 2.0)
        f = GridFunction.zeros(line64)
        g = GridFunction.zeros(other)
        with pytest.raises(ValueError):
            convolve(f, g)


class TestMollifierKernel:
    def test_unit_mass(self, square32):
        ker = mollifier_kernel(square32, 0.2)
        assert ker.sum() * square32.cell_volume == pytest.approx(1.0, abs=1e-12)

    def test_compact_support(self, square32):
        ker = mollifier_kernel(square32, 0.2)
        offs = square32.offset_lattice()
        r2 = offs[0] ** 2 + offs[1] ** 2
        assert np.all(ker[r2 >= 0.04] == 0.0)

    def test_resolution_guards(self, square32):
        with pytest.raises(ResolutionError):
            mollifier_kernel(square32, 0.5 * square32.h)
        with pytest.raises(ResolutionError):
            mollifier_kernel(square32, square32.d / 2)


class TestFileFormat:
    def test_roundtrip(self, tmp_path, square32, bump):
        f = bump(square32, 0.2)
        path = tmp_path / "f.grid"
        write_grid_function(f, path)
        g = read_grid_function(path)
        assert g.domain.n == 2 and g.domain.N == 32 and g.domain.d == 1.0
        assert np.array_equal(g.values, f.values)
        header = path.read_text().splitlines()[0]
        assert header == "2,32,1.0"

    def test_mask_roundtrip(self, tmp_path):
        dom = GridDomain(2, 16, 1.0)
        mask = dom.ball_mask([0.0, 0.0], 0.3)
        path = tmp_path / "mask.grid"
        write_mask(dom, path, mask)
        dom2, mask2 = read_mask(path)
        assert np.array_equal(mask, mask2)

    def test_lexicographic_order(self, tmp_path):
        dom = GridDomain(2, 4, 1.0)
        vals = np.arange(16.0).reshape(4, 4)
        write_grid_function(GridFunction(dom, vals), tmp_path / "g.grid")
        lines = (tmp_path / "g.grid").read_text().splitlines()
        assert [float(v) for v in lines[1:]] == list(range(16))


class TestImmutability:
    def test_values_locked(self, line64):
        f = GridFunction.zeros(line64)
        with pytest.raises(ValueError):
            f.values[0] = 1.0

    def test_finite_enforced_by_construction(self, line64):
        f = GridFunction.from_callable(line64, lambda x: np.sin(x))
        assert np.all(np.isfinite(f.values))
