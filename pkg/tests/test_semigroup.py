"""Tests for the spectral semigroup and its smoothing estimates."""

import math

import numpy as np
import pytest

from polyheat.core import grid, orlicz, semigroup
from polyheat.core.exceptions import DomainError, GridError
from polyheat.core.grid import GridSpec
from polyheat.core.semigroup import SemigroupOp

TIMES = (0.01, 0.1, 1.0, 10.0)
WINDOW = tuple(np.geomspace(1e-1, 1e-4, 7))


@pytest.fixture
def corpus(small_line_grid, rng):
    return [grid.random_smooth_field(small_line_grid, rng) for _ in range(8)]


class TestSemigroupOp:
    def test_identity_at_zero(self, bump):
        assert SemigroupOp(2, 0.0, bump.spec).apply(bump) is bump

    def test_grid_mismatch(self, bump, small_line_grid):
        with pytest.raises(GridError):
            SemigroupOp(1, 1.0, small_line_grid)(bump)

    def test_rejects_negative_time(self, line_grid):
        with pytest.raises(DomainError):
            SemigroupOp(1, -1.0, line_grid)

    def test_heat_flow_of_gaussian(self, bump):
        t = 2.0
        evolved = SemigroupOp(1, t, bump.spec).apply(bump)
        variance = 1.0 + 2.0 * t
        x = bump.spec.axis()
        expected = np.exp(-x ** 2 / (2 * variance)) / math.sqrt(variance)
        np.testing.assert_allclose(evolved.values, expected, atol=1e-12)

    def test_mass_is_conserved(self, corpus):
        field = corpus[0]
        evolved = SemigroupOp(2, 3.0, field.spec)(field)
        assert evolved.values.sum() == pytest.approx(field.values.sum(), rel=1e-12, abs=1e-12)

    def test_semigroup_property(self, corpus):
        field = corpus[1]
        spec = field.spec
        twice = SemigroupOp(2, 0.3, spec)(SemigroupOp(2, 0.2, spec)(field))
        once = SemigroupOp(2, 0.5, spec)(field)
        np.testing.assert_allclose(twice.values, once.values, atol=1e-13)

    def test_apply_many_matches_apply(self, corpus):
        field = corpus[2]
        many = semigroup.apply_many(field, TIMES, 2)
        for t, evolved in zip(TIMES, many):
            np.testing.assert_allclose(evolved.values, SemigroupOp(2, t, field.spec)(field).values, atol=1e-14)


class TestSmoothing:
    def test_exponent(self):
        assert semigroup.smoothing_exponent(1, 2, 1.0, math.inf) == 0.25
        assert semigroup.smoothing_exponent(2, 1, 2.0, 2.0) == 0.0

    def test_ratio_requires_ordered_pair(self, bump):
        with pytest.raises(DomainError):
            semigroup.smoothing_ratio(bump, 1.0, 4.0, 2.0, 2)

    def test_ratio_of_zero_field(self, small_line_grid):
        assert semigroup.smoothing_ratio(grid.GridField.zeros(small_line_grid), 1.0, 1.0, 2.0, 2) == 0.0

    @pytest.mark.parametrize("d", [1, 2])
    def test_l2_ratio_nonincreasing_in_time(self, corpus, d):
        for field in corpus:
            ratios = [semigroup.smoothing_ratio(field, t, 2.0, 2.0, d) for t in (0.01, 0.1, 1.0, 10.0)]
            assert all(b <= a * (1 + 1e-12) for a, b in zip(ratios, ratios[1:]))

    @pytest.mark.parametrize("p", [1.0, 4.0, math.inf])
    def test_heat_ratio_nonincreasing_in_time(self, corpus, p):
        for field in corpus:
            ratios = [semigroup.smoothing_ratio(field, t, p, p, 1) for t in (0.1, 0.3, 1.0, 3.0, 10.0)]
            assert all(b <= a * (1 + 1e-10) for a, b in zip(ratios, ratios[1:]))

    def test_standard_pairs(self):
        pairs = semigroup.standard_pairs()
        assert len(pairs) == 10
        assert all(p <= q for p, q in pairs)

    def test_sweep_constant_feeds_inequality_checks(self, corpus):
        constant = semigroup.smoothing_sweep(corpus, TIMES, 2, jobs=2)
        H = constant.value
        assert 0 < H < math.inf
        assert len(constant.samples) == len(corpus) * len(TIMES) * 10
        for field in corpus:
            for t in TIMES:
                for p in (1.0, 2.0):
                    assert semigroup.orlicz_smoothing_check(field, t, p, 2, H).holds
                for q in (1.0, 2.0, 4.0):
                    assert semigroup.orlicz_smoothing_check_mixed(field, t, q, 2, H).holds

    def test_sweep_is_deterministic_across_jobs(self, corpus):
        a = semigroup.smoothing_sweep(corpus, TIMES, 1, jobs=1)
        b = semigroup.smoothing_sweep(corpus, TIMES, 1, jobs=4)
        assert a.samples == b.samples

    def test_check_rejects_large_p(self, bump):
        with pytest.raises(DomainError):
            semigroup.orlicz_smoothing_check(bump, 1.0, 3.0, 2, 1.0)

    def test_constant_persistence(self, tmp_path, corpus):
        constant = semigroup.smoothing_sweep(corpus[:2], TIMES, 2)
        loaded = semigroup.SmoothingConstant.load(constant.save(tmp_path / "H.json"))
        assert loaded.value == constant.value
        lines = constant.export_csv(tmp_path / "sweep.csv").read_text().splitlines()
        assert lines[0] == "t,p,q,ratio"
        assert len(lines) == len(constant.samples) + 1


class TestWeights:
    def test_kappa_domain(self):
        with pytest.raises(DomainError):
            semigroup.kappa(1.0, 8, 4.0, d=2)
        with pytest.raises(DomainError):
            semigroup.kappa(1.0, 9, 2.0, d=2)

    def test_weight_integrals_finite_and_stable(self):
        for weight in (lambda t: semigroup.kappa(t, 9, 4.5, 2), semigroup.zeta):
            integral = semigroup.integrate_weight(weight)
            assert math.isfinite(integral.value)
            assert integral.value > 0
            assert integral.stability < 1e-6

    def test_zeta_branches(self):
        # small t follows 1 + t^(-1/2), large t the logarithmic tail
        assert semigroup.zeta(1e-6) == pytest.approx((1 + 1e3) / math.sqrt(math.log(2.0)))
        x = 1e-4
        assert semigroup.zeta(100.0) == pytest.approx(x * math.log1p(x) ** -0.25 / math.sqrt(math.log(2.0)))


class TestContinuityAtZero:
    def test_smooth_bump_is_continuous(self, bump):
        distance = semigroup.continuity_at_zero(bump, [1e-6], 2)[0]
        assert distance < 1e-3

    def test_times_must_decrease(self, bump):
        with pytest.raises(DomainError):
            semigroup.continuity_at_zero(bump, [1e-3, 1e-2], 2)

    @pytest.mark.parametrize("points", [2048, 4096])
    def test_witness_stays_away(self, points):
        witness = orlicz.witness_function("discontinuity", GridSpec(1, points, 4.0))
        scan = semigroup.continuity_scan(witness, WINDOW, 2)
        assert scan.bounded_away(floor=0.4, spread=2.5)

    def test_smooth_bump_loses_its_distance(self, bump):
        scan = semigroup.continuity_scan(bump, WINDOW, 2)
        assert scan.spread > 100
        assert not scan.bounded_away(floor=0.4, spread=2.5)

    def test_witness_floor_grows_under_refinement(self):
        floors = semigroup.continuity_floor_under_refinement(
            lambda spec: orlicz.witness_function("discontinuity", spec),
            [GridSpec(1, 2048, 4.0), GridSpec(1, 4096, 4.0)], WINDOW, 2)
        assert floors[1] >= floors[0]

    def test_scan_of_zero_field(self, small_line_grid):
        scan = semigroup.continuity_scan(grid.GridField.zeros(small_line_grid), [1e-2, 1e-3], 2)
        assert scan.floor == 0.0
        assert scan.spread == math.inf
