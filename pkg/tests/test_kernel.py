"""Tests for the polyharmonic heat kernel and its majorant."""

import dataclasses
import math

import numpy as np
import pytest
from scipy import integrate

from polyheat.core import kernel
from polyheat.core.exceptions import DomainError, MajorantInfeasibleError, QuadratureError
from polyheat.core.specfun import gamma


@pytest.fixture(scope="module")
def biharmonic_profile():
    return kernel.tabulate_profile(1, 2)


class TestBessel:
    def test_half_integer_zeros(self):
        np.testing.assert_allclose(kernel.bessel_zeros(0.5, 3), [math.pi, 2 * math.pi, 3 * math.pi])
        np.testing.assert_allclose(kernel.bessel_zeros(-0.5, 2), [0.5 * math.pi, 1.5 * math.pi])

    def test_integer_zeros(self):
        assert kernel.bessel_zeros(0.0, 1)[0] == pytest.approx(2.404825557695773)

    def test_ratio_continuous_at_zero(self):
        small = kernel.bessel_ratio(1.0, np.array([1e-8]))[0]
        assert kernel.bessel_ratio(1.0, np.array([0.0]))[0] == pytest.approx(small, rel=1e-12)


class TestKernelValues:
    def test_value_at_zero_closed_form(self):
        assert kernel.kernel_value_at_zero(1, 2) == pytest.approx(gamma(1.25) / math.pi, rel=1e-14)
        assert kernel.eval_profile(0.0, 1, 2) == pytest.approx(gamma(1.25) / math.pi, rel=1e-12)

    @pytest.mark.parametrize("N", [1, 2, 3])
    def test_heat_kernel_is_gaussian(self, N):
        r = np.linspace(0.0, 10.0, 41)
        values, _ = kernel.kernel_values(r, N, 1)
        expected = (4 * math.pi) ** (-N / 2) * np.exp(-r ** 2 / 4)
        np.testing.assert_allclose(values, expected, rtol=0, atol=1e-10)

    def test_matches_dft_inversion(self):
        by_dft = kernel.profile_by_dft(1, 2, box_length=128.0, points_per_axis=1024)
        radii = np.abs(by_dft.spec.axis())
        values, _ = kernel.kernel_values(radii, 1, 2)
        significant = np.abs(values) > 1e-8
        rel = np.abs(by_dft.values[significant] - values[significant]) / np.abs(values[significant])
        assert rel.max() < 1e-6

    @pytest.mark.parametrize("N", [1, 2, 3])
    def test_dft_route_matches_heat_kernel(self, N):
        r = np.linspace(0.0, 6.0, 13)
        values, errors = kernel.kernel_values_by_dft(r, N, 1)
        expected = (4 * math.pi) ** (-N / 2) * np.exp(-r ** 2 / 4)
        np.testing.assert_allclose(values, expected, rtol=0, atol=1e-10)
        assert errors.max() < 1e-10

    def test_dft_route_agrees_with_quadrature(self):
        r = np.linspace(0.0, 10.0, 21)
        by_quadrature, _ = kernel.kernel_values(r, 1, 2)
        by_dft, _ = kernel.kernel_values_by_dft(r, 1, 2)
        np.testing.assert_allclose(by_dft, by_quadrature, rtol=0, atol=1e-10)

    def test_missed_radii_fall_back_to_dft(self, monkeypatch):
        monkeypatch.setattr(kernel, "_quadrature_values", lambda r, N, d, t, workers: (np.zeros_like(r), np.ones_like(r)))
        r = np.array([0.0, 0.5, 2.0, 4.0])
        values, errors = kernel.kernel_values(r, 1, 1)
        np.testing.assert_allclose(values, np.exp(-r ** 2 / 4) / math.sqrt(4 * math.pi), rtol=0, atol=1e-10)
        assert errors.max() <= kernel.ERROR_TARGET

    def test_raises_when_both_routes_miss(self, monkeypatch):
        monkeypatch.setattr(kernel, "_quadrature_values", lambda r, N, d, t, workers: (np.zeros_like(r), np.ones_like(r)))
        monkeypatch.setattr(kernel, "kernel_values_by_dft", lambda r, N, d, t: (np.zeros_like(r), np.full_like(r, 0.5)))
        with pytest.raises(QuadratureError) as info:
            kernel.kernel_values([1.0, 2.0], 1, 2)
        assert info.value.error_estimate == 0.5

    def test_scaling(self):
        check = kernel.scaling_check(0.5, [1.3], 1, 2)
        assert check.rel_err < 1e-9

    def test_unit_mass(self):
        assert kernel.kernel_mass(1, 2) == pytest.approx(1.0, abs=1e-8)

    def test_rejects_bad_arguments(self):
        with pytest.raises(DomainError):
            kernel.kernel_values([1.0], 1, 0)
        with pytest.raises(DomainError):
            kernel.kernel_values([-1.0], 1, 2)
        with pytest.raises(DomainError):
            kernel.eval_profile(-0.5, 1, 2)


class TestProfile:
    def test_biharmonic_kernel_changes_sign(self, biharmonic_profile):
        assert biharmonic_profile.sign_changes >= 1
        assert biharmonic_profile.radii.size == 2048

    @pytest.mark.parametrize("N", [1, 2, 3])
    def test_heat_kernel_is_positive(self, N):
        profile = kernel.tabulate_profile(N, 1, n_radii=256)
        assert profile.sign_changes == 0

    @pytest.mark.parametrize("N", [1, 2])
    def test_biharmonic_kernel_goes_negative(self, N):
        profile = kernel.tabulate_profile(N, 2, n_radii=256)
        assert profile.sign_changes >= 1
        assert profile.values.min() < 0

    def test_errors_are_reported_per_radius(self, biharmonic_profile):
        assert biharmonic_profile.quad_error.shape == biharmonic_profile.radii.shape
        assert biharmonic_profile.quad_error.max() <= kernel.ERROR_TARGET

    def test_count_sign_changes_ignores_roundoff(self):
        assert kernel.count_sign_changes(np.array([1.0, 0.5, -0.2, 0.1, 1e-15, -1e-15])) == 2

    def test_csv_starts_at_origin(self, tmp_path, biharmonic_profile):
        lines = biharmonic_profile.export_csv(tmp_path / "profile.csv").read_text().splitlines()
        assert lines[0] == "r,value,quad_error"
        assert lines[1].startswith("0.0,")
        assert len(lines) == 2050


class TestMajorant:
    def test_fit_holds_on_every_radius(self, biharmonic_profile):
        fit = kernel.fit_majorant(biharmonic_profile)
        assert fit.K > 1
        assert fit.mu > 0
        assert fit.exponent == pytest.approx(4.0 / 3.0)
        assert fit.holds_on(biharmonic_profile)

    def test_refit_after_refinement(self):
        fine = kernel.tabulate_profile(1, 2, n_radii=4096)
        fit = kernel.fit_majorant(fine)
        assert fit.holds_on(fine)

    def test_explicit_exponent_for_heat_kernel(self):
        profile = kernel.tabulate_profile(1, 1, n_radii=512)
        fit = kernel.fit_majorant(profile, exponent=4.0 / 3.0)
        assert fit.holds_on(profile)

    def test_tampered_profile_is_infeasible(self, biharmonic_profile):
        values = biharmonic_profile.values.copy()
        values[-20] += 50.0 * biharmonic_profile.value_at_zero
        tampered = dataclasses.replace(biharmonic_profile, values=values)
        with pytest.raises(MajorantInfeasibleError):
            kernel.fit_majorant(tampered)

    def test_undecayed_profile_rejected(self):
        short = kernel.tabulate_profile(1, 2, n_radii=64, r_max=5.0)
        with pytest.raises(DomainError):
            kernel.fit_majorant(short)

    def test_normalizer_integrates_to_one(self):
        mu, beta = 0.7, 4.0 / 3.0
        omega = kernel.majorant_normalizer(mu, beta, 1)
        r = np.linspace(0.0, 200.0, 400001)
        integral = 2.0 * integrate.trapezoid(np.exp(-mu * r ** beta), r)
        assert omega * integral == pytest.approx(1.0, rel=1e-6)

    def test_save(self, tmp_path, biharmonic_profile):
        fit = kernel.fit_majorant(biharmonic_profile)
        text = fit.save(tmp_path / "majorant.json").read_text()
        assert '"K"' in text and '"mu"' in text
