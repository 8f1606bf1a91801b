"""Tests for grids, sampled fields and their persistence."""

import math

import numpy as np
import pytest
from scipy import fft as scipy_fft

from polyheat.core import grid
from polyheat.core.exceptions import GridError, NonFiniteSampleError, TruncationError
from polyheat.core.grid import GridField, GridSpec


class TestGridSpec:
    def test_origin_is_a_node(self, line_grid):
        axis = line_grid.axis()
        assert axis[0] == -128.0
        assert axis[2048] == 0.0
        assert line_grid.spacing == 1.0 / 16.0

    @pytest.mark.parametrize("n", [0, 6, 100, 4095])
    def test_rejects_non_power_of_two(self, n):
        with pytest.raises(GridError):
            GridSpec(1, n, 1.0)

    def test_rejects_bad_dimension_and_length(self):
        with pytest.raises(GridError):
            GridSpec(4, 16, 1.0)
        with pytest.raises(GridError):
            GridSpec(1, 16, -1.0)

    def test_radius_clip(self, small_line_grid):
        h = small_line_grid.spacing
        assert small_line_grid.radius().min() == 0.0
        assert small_line_grid.radius(clip=True).min() == pytest.approx(0.5 * h)

    def test_frequency_layout(self, plane_grid):
        k2 = plane_grid.frequency_squared(real=True)
        assert k2.shape == (128, 65)
        fundamental = 2.0 * math.pi / plane_grid.box_length
        assert k2[1, 0] == pytest.approx(fundamental ** 2)
        assert plane_grid.frequency_squared(real=False).shape == (128, 128)


class TestGridField:
    def test_values_are_read_only_copies(self, small_line_grid):
        raw = np.ones(small_line_grid.size)
        field = GridField(small_line_grid, raw)
        raw[0] = 5.0
        assert field.values[0] == 1.0
        with pytest.raises(ValueError):
            field.values[0] = 2.0

    def test_non_finite_sample_reports_location(self, small_line_grid):
        raw = np.zeros(small_line_grid.size)
        raw[7] = np.nan
        with pytest.raises(NonFiniteSampleError) as info:
            GridField(small_line_grid, raw)
        assert info.value.index == (7,)
        assert info.value.point == (small_line_grid.axis()[7],)

    def test_arithmetic_requires_same_grid(self, small_line_grid, line_grid):
        a = GridField.zeros(small_line_grid)
        b = GridField.zeros(line_grid)
        with pytest.raises(GridError):
            a + b

    def test_scalar_arithmetic(self, small_line_grid):
        field = grid.gaussian_bump(small_line_grid, 1.0)
        doubled = 2 * field
        assert doubled.sup == pytest.approx(2.0)
        assert (doubled - field - field).is_zero()


class TestNorms:
    def test_gaussian_l2_norm(self, line_grid):
        field = grid.gaussian_bump(line_grid, width=1.0)
        assert grid.lp_norm(field, 2) == pytest.approx(math.pi ** 0.25, rel=1e-12)
        assert grid.lp_norm(field, 1) == pytest.approx(math.sqrt(2 * math.pi), rel=1e-12)
        assert grid.lp_norm(field, math.inf) == 1.0

    def test_large_exponent_does_not_overflow(self, small_line_grid):
        field = grid.gaussian_bump(small_line_grid, 1.0, height=1e10)
        value = grid.lp_norm(field, 400.0)
        assert math.isfinite(value)
        assert value == pytest.approx(1e10, rel=0.05)

    def test_rejects_p_below_one(self, small_line_grid):
        with pytest.raises(Exception):
            grid.lp_norm(GridField.zeros(small_line_grid), 0.5)

    def test_norms_monotone_on_unit_measure_indicator(self):
        spec = GridSpec(1, 64, 4.0)
        field = grid.indicator_field(spec, 3.0, 1.0)
        for p in (1.0, 2.0, 4.0, math.inf):
            assert grid.lp_norm(field, p) == pytest.approx(3.0, rel=1e-14)


class TestSampling:
    def test_indicator_exact_cells(self):
        spec = GridSpec(2, 32, 4.0)
        field = grid.indicator_field(spec, 1.0, 20 * spec.cell_volume)
        assert np.count_nonzero(field.values) == 20

    def test_indicator_rejects_fractional_measure(self):
        spec = GridSpec(1, 64, 4.0)
        with pytest.raises(GridError):
            grid.indicator_field(spec, 1.0, 0.3 * spec.cell_volume)

    def test_sample_function(self, plane_grid):
        field = grid.sample_function(plane_grid, lambda x, y: x * 0 + y * 0 + 2.0)
        assert np.all(field.values == 2.0)

    def test_random_fields_are_seeded_and_confined(self, plane_grid):
        a = grid.random_smooth_field(plane_grid, np.random.default_rng(3))
        b = grid.random_smooth_field(plane_grid, np.random.default_rng(3))
        np.testing.assert_array_equal(a.values, b.values)
        assert grid.boundary_ratio(a) < 1e-6


class TestBoundary:
    def test_bump_boundary_negligible(self, bump):
        assert grid.ensure_negligible_boundary(bump) < 1e-12

    def test_wide_field_raises(self, small_line_grid):
        field = grid.gaussian_bump(small_line_grid, width=10.0)
        with pytest.raises(TruncationError) as info:
            grid.ensure_negligible_boundary(field)
        assert info.value.ratio > 1e-8

    def test_zero_field(self, small_line_grid):
        assert grid.boundary_ratio(GridField.zeros(small_line_grid)) == 0.0


class TestPersistence:
    def test_save_and_load(self, tmp_path, plane_grid, rng):
        field = grid.random_smooth_field(plane_grid, rng)
        path = grid.save_field(field, tmp_path / "field.bin")
        loaded = grid.load_field(path)
        assert loaded.spec == plane_grid
        np.testing.assert_array_equal(loaded.values, field.values)

    def test_load_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b'{"format": "other"}\n\x00\x00')
        with pytest.raises(Exception):
            grid.load_field(path)

    def test_csv_export(self, tmp_path, small_line_grid):
        field = grid.gaussian_bump(small_line_grid, 1.0)
        path = grid.export_csv(field, tmp_path / "field.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "x,value"
        assert len(lines) == small_line_grid.points_per_axis + 1
        x, value = map(float, lines[1 + 128].split(","))
        assert x == 0.0 and value == 1.0

    def test_csv_export_rejects_plane(self, tmp_path, plane_grid):
        with pytest.raises(Exception):
            grid.export_csv(GridField.zeros(plane_grid), tmp_path / "f.csv")


class TestNormProperties:
    @pytest.fixture
    def pairs(self, small_line_grid, rng):
        return [
            (grid.random_smooth_field(small_line_grid, rng), grid.random_smooth_field(small_line_grid, rng))
            for _ in range(200)
        ]

    def test_interpolation_between_two_and_sup(self, pairs):
        for field, _ in pairs:
            two, sup = grid.lp_norm(field, 2), grid.lp_norm(field, math.inf)
            for q in (4.0, 8.0, 16.0):
                bound = two ** (2 / q) * sup ** (1 - 2 / q)
                assert grid.lp_norm(field, q) <= bound * (1 + 1e-12)

    @pytest.mark.parametrize("p", [1.0, 2.0, 3.5, math.inf])
    def test_triangle_inequality_and_homogeneity(self, pairs, rng, p):
        for u, v in pairs:
            total = grid.lp_norm(u + v, p)
            assert total <= (grid.lp_norm(u, p) + grid.lp_norm(v, p)) * (1 + 1e-12)
            c = float(rng.uniform(-5.0, 5.0))
            assert grid.lp_norm(u * c, p) == pytest.approx(abs(c) * grid.lp_norm(u, p), rel=1e-12)

    @pytest.mark.parametrize("p", [2.0, 3.0, 4.0])
    def test_refinement_increments_shrink(self, p):
        norms = [
            grid.lp_norm(grid.sample_function(GridSpec(1, n, 4.0), lambda x: np.maximum(0.0, 1.0 - np.abs(x))), p)
            for n in (64, 128, 256)
        ]
        first, second = abs(norms[1] - norms[0]), abs(norms[2] - norms[1])
        assert 0.0 < second < first

    def test_single_cosine_has_two_frequency_bins(self):
        spec = GridSpec(1, 64, 4.0)
        field = grid.sample_function(spec, lambda x: np.cos(2 * math.pi * x / spec.box_length))
        spectrum = np.abs(scipy_fft.fft(field.values))
        nonzero = np.flatnonzero(spectrum > 1e-9 * spectrum.max())
        assert nonzero.tolist() == [1, spec.points_per_axis - 1]
