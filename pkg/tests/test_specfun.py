"""Tests for Gamma, Beta and the Stirling-type bounds."""

import math

import numpy as np
import pytest

from polyheat.core import specfun
from polyheat.core.exceptions import DomainError


class TestGamma:
    def test_known_values(self):
        assert specfun.gamma(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
        assert specfun.gamma(5.0) == pytest.approx(24.0, rel=1e-14)
        assert specfun.gamma(1.25) == pytest.approx(0.9064024770554771, rel=1e-14)

    def test_array_input(self):
        values = specfun.gamma(np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(values, [1.0, 1.0, 2.0], rtol=1e-14)

    def test_recurrence(self, rng):
        x = rng.uniform(0.05, 20.0, 100)
        np.testing.assert_allclose(specfun.gamma(x + 1.0), x * specfun.gamma(x), rtol=1e-13)

    @pytest.mark.parametrize("bad", [0.0, -1.0, -0.5, math.inf, math.nan])
    def test_rejects_non_positive(self, bad):
        with pytest.raises(DomainError):
            specfun.gamma(bad)

    def test_log_gamma_large_argument(self):
        # Gamma(200) overflows but its logarithm does not
        assert specfun.log_gamma(200.0) == pytest.approx(math.lgamma(200.0), rel=1e-14)

    @pytest.mark.parametrize("x", [0.3, 1.0, 2.5, 7.0])
    def test_quadrature_oracle(self, x):
        assert specfun.gamma_by_quadrature(x) == pytest.approx(math.gamma(x), rel=1e-10)


class TestBeta:
    def test_symmetry_is_exact(self, rng):
        for x, y in rng.uniform(0.1, 10.0, size=(20, 2)):
            assert specfun.beta(x, y) == specfun.beta(y, x)

    def test_half_half(self):
        assert specfun.beta(0.5, 0.5) == pytest.approx(math.pi, rel=1e-14)

    def test_matches_defining_integral(self, rng):
        for x, y in rng.uniform(0.5, 5.0, size=(50, 2)):
            closed = specfun.beta(x, y)
            assert abs(closed - specfun.beta_by_quadrature(x, y)) <= 1e-10 * closed

    def test_rejects_zero(self):
        with pytest.raises(DomainError):
            specfun.beta(0.0, 1.0)


class TestGeometry:
    def test_unit_ball_volumes(self):
        assert specfun.unit_ball_volume(1) == pytest.approx(2.0, rel=1e-14)
        assert specfun.unit_ball_volume(2) == pytest.approx(math.pi, rel=1e-14)
        assert specfun.unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0, rel=1e-14)

    def test_sphere_area_is_n_times_volume(self):
        for N in range(1, 9):
            assert specfun.sphere_area(N) == pytest.approx(N * specfun.unit_ball_volume(N), rel=1e-13)


class TestBounds:
    def test_stirling_ratios_decrease_to_one(self):
        report = specfun.check_gamma_bounds(np.geomspace(1.0, 150.0, 40))
        assert report.monotone_trend
        assert report.stirling_ratios[-1] == pytest.approx(1.0, abs=1e-3)
        assert math.isfinite(report.constant)
        assert report.constant > 0

    def test_samples_below_one_rejected(self):
        with pytest.raises(DomainError):
            specfun.check_gamma_bounds([0.5, 2.0])

    def test_gamma_lower_bound(self):
        minimum, argmin = specfun.gamma_lower_bound(np.linspace(0.05, 10.0, 4000))
        assert minimum == pytest.approx(0.8856031944108887, rel=1e-5)
        assert argmin == pytest.approx(1.4616, abs=5e-3)

    def test_config_validation(self):
        with pytest.raises(DomainError):
            specfun.SpecFunConfig(relative_tolerance=0.0)
