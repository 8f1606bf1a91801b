"""Tests for Orlicz modulars, Luxemburg norms, rearrangements and witnesses."""

import math

import numpy as np
import pytest

from polyheat.core import grid, orlicz
from polyheat.core.exceptions import DomainError, HypothesisViolation
from polyheat.core.grid import GridField, GridSpec
from polyheat.core.orlicz import EXP_L2, YoungFunction


@pytest.fixture
def corpus(small_line_grid, rng):
    return [grid.random_smooth_field(small_line_grid, rng) for _ in range(200)]


class TestYoungFunction:
    def test_from_name(self):
        assert YoungFunction.from_name("expl2") == EXP_L2
        assert YoungFunction.from_name("power:4") == YoungFunction.power(4.0)
        assert YoungFunction.from_name("PHI8").kind == "phi8"

    @pytest.mark.parametrize("name", ["power", "power:0.5", "cosh", "power:inf"])
    def test_rejects_bad_names(self, name):
        with pytest.raises(DomainError):
            YoungFunction.from_name(name)

    def test_phi8_small_argument_accuracy(self):
        s = np.array([1e-3, 1e-2])
        expected = s ** 4 / 2 + s ** 6 / 6 + s ** 8 / 24 + s ** 10 / 120
        np.testing.assert_allclose(YoungFunction.phi8()(s), expected, rtol=1e-12)

    def test_overflow_becomes_inf(self):
        assert np.isinf(EXP_L2(np.array([30.0]))[0])


class TestLuxemburg:
    def test_indicator_closed_form(self, rng):
        spec = GridSpec(1, 64, 4.0)
        for _ in range(100):
            c = rng.uniform(0.1, 10.0)
            cells = int(rng.integers(1, 65))
            a = cells * spec.cell_volume
            field = grid.indicator_field(spec, c, a)
            expected = c / math.sqrt(math.log1p(1.0 / a))
            assert orlicz.exp_l2_norm(field) == pytest.approx(expected, rel=1e-8)

    def test_defining_inequality_holds_at_result(self, corpus):
        for field in corpus[:20]:
            norm = orlicz.exp_l2_norm(field)
            assert orlicz.orlicz_integral(field, EXP_L2, norm) <= 1.0
            assert orlicz.orlicz_integral(field, EXP_L2, norm * (1 - 1e-10)) > 1.0 - 1e-6

    def test_zero_field(self, small_line_grid):
        assert orlicz.exp_l2_norm(GridField.zeros(small_line_grid)) == 0.0

    def test_monotone_and_homogeneous(self, corpus):
        field = corpus[0]
        norm = orlicz.exp_l2_norm(field)
        assert orlicz.exp_l2_norm(field * 3.0) == pytest.approx(3.0 * norm, rel=1e-12)
        half = field.with_values(0.5 * field.values)
        assert orlicz.exp_l2_norm(half) <= norm

    def test_monotone_under_pointwise_domination(self, corpus, rng):
        for field in corpus:
            damping = rng.uniform(0.0, 1.0, field.values.shape)
            dominated = field.with_values(field.values * damping)
            assert orlicz.exp_l2_norm(dominated) <= orlicz.exp_l2_norm(field) * (1 + 1e-12)

    def test_truncations_converge_upward(self):
        field = orlicz.witness_function("orlleb_ii", GridSpec(1, 4096, 8.0))
        top = float(np.max(np.abs(field.values)))
        norms = [
            orlicz.exp_l2_norm(field.with_values(np.minimum(np.abs(field.values), level)))
            for level in np.linspace(0.1 * top, top, 40)
        ]
        assert all(b >= a * (1 - 1e-12) for a, b in zip(norms, norms[1:]))
        assert norms[-1] == pytest.approx(orlicz.exp_l2_norm(field), rel=1e-12)
        assert norms[0] < norms[-1]

    def test_power_kind_is_lp_norm(self, corpus):
        field = corpus[1]
        value = orlicz.luxemburg_norm(field, YoungFunction.power(2.0))
        assert value == pytest.approx(grid.lp_norm(field, 2), rel=1e-12)


class TestInequalities:
    def test_embedding(self, corpus):
        for field in corpus:
            for r in (2.0, 3.0, 4.0, 6.0):
                assert orlicz.embedding_check(field, r).holds

    def test_embedding_rejects_small_r(self, corpus):
        with pytest.raises(DomainError):
            orlicz.embedding_check(corpus[0], 1.5)

    def test_exp_moment_bound(self, corpus, rng):
        for field in corpus:
            K = orlicz.exp_l2_norm(field)
            p = float(rng.uniform(1.0, 4.0))
            lam = float(rng.uniform(0.1, 1.0)) / (p * K * K)
            assert orlicz.exp_moment_bound(field, lam, p, K).holds

    def test_exp_moment_bound_hypotheses(self, corpus):
        field = corpus[0]
        K = orlicz.exp_l2_norm(field)
        with pytest.raises(HypothesisViolation):
            orlicz.exp_moment_bound(field, 2.0 / (K * K), 1.0, K)
        with pytest.raises(HypothesisViolation):
            orlicz.exp_moment_bound(field, 0.1 / (K * K), 1.0, 0.5 * K)

    def test_log2_bound(self, corpus):
        assert all(orlicz.log2_bound(field).holds for field in corpus)

    def test_slim_equivalence_constants(self, corpus):
        c1, c2 = orlicz.slim_equivalence_constants(corpus[:30])
        assert 0 < c1 <= c2 < math.inf


class TestRearrangement:
    def test_equimeasurable(self, plane_grid, rng):
        field = grid.random_smooth_field(plane_grid, rng)
        profile = orlicz.rearrange(field)
        assert np.all(np.diff(profile.u_sharp) <= 0)
        for p in (1.0, 2.0, 4.0):
            assert profile.lp_norm(p) == pytest.approx(grid.lp_norm(field, p), rel=1e-12)

    def test_sharpsharp_at_nodes_matches_table(self, corpus):
        profile = orlicz.rearrange(corpus[0])
        np.testing.assert_allclose(profile.sharpsharp_at(profile.radii[:50]), profile.u_sharpsharp[:50],
                                   rtol=1e-12)
        with pytest.raises(DomainError):
            profile.sharpsharp_at(0.0)

    def test_sharpsharp_dominates_sharp(self, corpus):
        profile = orlicz.rearrange(corpus[2])
        assert np.all(profile.u_sharpsharp >= profile.u_sharp * (1 - 1e-14))

    @pytest.mark.parametrize("dimension, points", [(1, 4096), (2, 256)])
    def test_discontinuity_witness_profile(self, dimension, points):
        spec = GridSpec(dimension, points, 4.0)
        profile = orlicz.rearrange(orlicz.witness_function("discontinuity", spec))
        upper = orlicz.discontinuity_window(dimension)
        r = np.geomspace(0.01, 0.99 * upper, 100)
        expected = np.sqrt(np.log(math.e / r))
        np.testing.assert_allclose(profile.sharpsharp_at(r), expected, rtol=0.05)

    def test_csv_export(self, tmp_path, corpus):
        profile = orlicz.rearrange(corpus[0])
        lines = profile.export_csv(tmp_path / "r.csv").read_text().splitlines()
        assert lines[0] == "r,u_sharp,u_sharpsharp"
        assert len(lines) == profile.radii.size + 1


class TestSharpNormBound:
    def test_holds_without_constant(self, corpus):
        bound = orlicz.sharp_norm_lower_bound(corpus[0])
        assert bound.holds
        assert bound.ratio > 0

    def test_empirical_constant_reused(self, corpus):
        constant = orlicz.empirical_sharp_constant(corpus[:30])
        assert all(orlicz.sharp_norm_lower_bound(f, constant).holds for f in corpus[:30])

    def test_constant_stable_under_refinement(self):
        coarse = [grid.random_smooth_field(GridSpec(1, 256, 32.0), np.random.default_rng(s)) for s in range(10)]
        fine = [grid.random_smooth_field(GridSpec(1, 512, 32.0), np.random.default_rng(s)) for s in range(10)]
        a = orlicz.empirical_sharp_constant(coarse)
        b = orlicz.empirical_sharp_constant(fine)
        assert b == pytest.approx(a, rel=0.1)


class TestWitnesses:
    def test_unknown_witness(self, small_line_grid):
        with pytest.raises(DomainError):
            orlicz.witness_function("nope", small_line_grid)

    def test_orlleb_iii_needs_r(self, small_line_grid):
        with pytest.raises(DomainError):
            orlicz.witness_function("orlleb_iii", small_line_grid)
        with pytest.raises(DomainError):
            orlicz.witness_function("orlleb_iii", small_line_grid, r=2.0)

    def test_orlleb_iii_modular_matches_series(self):
        spec = GridSpec(1, 16384, 256.0)
        field = orlicz.witness_function("orlleb_iii", spec, r=1.0)
        series = orlicz.orlleb_iii_modular(1.0, 1.0, 1)
        assert series == pytest.approx(2.41404, abs=1e-4)
        assert orlicz.orlicz_integral(field, EXP_L2, 1.0) == pytest.approx(series, rel=0.05)

    def test_orlleb_ii_is_unbounded_but_finite_modular(self):
        sups = [orlicz.witness_function("orlleb_ii", GridSpec(1, n, 4.0)).sup for n in (256, 4096)]
        assert sups[1] > sups[0]
        scan = orlicz.membership_scan("orlleb_ii", 1.0)
        assert not scan.diverges

    def test_orlleb_i_membership_threshold(self):
        assert orlicz.membership_scan("orlleb_i", 0.7).diverges
        assert not orlicz.membership_scan("orlleb_i", 1.5).diverges

    def test_scan_needs_three_resolutions(self):
        with pytest.raises(DomainError):
            orlicz.membership_scan("orlleb_i", 1.0, resolutions=(256, 512))
