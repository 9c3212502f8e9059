from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partialid.ate import (Assumption, AteSummary, ConfounderScenario,
                           bias_adjusted_naive, combined_bounds, gamma0_feasible,
                           mtr_bounds, mts_bounds, naive_estimate,
                           no_assumption_bounds, rescale_interval, stratified_bounds)
from partialid.data import Interval, StratifiedCounts, Stratum, TwoArmCounts, empirical_law
from partialid.errors import InfeasibilityError, ValidationError
from util import azt_counts, cholestyramine_counts

means = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
prevalences = st.floats(min_value=0.01, max_value=0.99, allow_nan=False)


def summaries():
    return st.builds(AteSummary, mean_y1=means, mean_y0=means, p1=prevalences)


@pytest.fixture
def azt_summary():
    return AteSummary.from_counts(azt_counts(), rational=True)


class TestNoAssumptionBounds:
    def test_azt_exact(self, azt_summary):
        iv = no_assumption_bounds(azt_summary)
        assert iv.lo == Fraction(-7, 10)
        assert iv.hi == Fraction(3, 10)

    def test_zero_outcomes(self):
        iv = no_assumption_bounds(AteSummary(mean_y1=0.0, mean_y0=0.0, p1=0.5))
        assert iv == Interval(-0.5, 0.5)

    @given(summaries())
    @settings(max_examples=300)
    def test_width_one_and_contains_zero(self, s):
        iv = no_assumption_bounds(s)
        assert iv.lo + 1 == pytest.approx(iv.hi, abs=1e-12)
        assert iv.contains(0.0, tol=1e-12)
        assert -1 - 1e-12 <= iv.lo and iv.hi <= 1 + 1e-12


class TestMtsMtr:
    def test_azt_mts(self, azt_summary):
        iv = mts_bounds(azt_summary)
        assert iv.lo == Fraction(-7, 10)
        assert float(iv.hi) == pytest.approx(-0.476, abs=0.001)

    def test_identical_means_upper_is_zero(self):
        iv = mts_bounds(AteSummary(mean_y1=0.4, mean_y0=0.4, p1=0.3))
        assert iv.hi == 0.0

    def test_azt_mtr(self, azt_summary):
        iv = mtr_bounds(azt_summary)
        assert iv.lo == 0
        assert iv.hi == Fraction(3, 10)

    def test_extreme_means(self):
        iv = mtr_bounds(AteSummary(mean_y1=1.0, mean_y0=0.0, p1=0.5))
        assert iv == Interval(0, 1.0)

    @given(summaries())
    @settings(max_examples=300)
    def test_contained_in_no_assumption(self, s):
        outer = no_assumption_bounds(s)
        assert outer.contains_interval(mts_bounds(s), tol=1e-12)
        assert outer.contains_interval(mtr_bounds(s), tol=1e-12)
        assert mtr_bounds(s).lo == 0


class TestCombinedBounds:
    def test_azt_joint_assumptions_infeasible(self, azt_summary):
        with pytest.raises(InfeasibilityError, match="inconsistent"):
            combined_bounds(azt_summary, {Assumption.MTS, Assumption.MTR})

    def test_empty_set_is_no_assumption(self, azt_summary):
        assert combined_bounds(azt_summary, set()) == no_assumption_bounds(azt_summary)

    def test_single_assumption(self, azt_summary):
        assert combined_bounds(azt_summary, {Assumption.MTS}) == mts_bounds(azt_summary)


class TestNaiveAndBiasAdjustment:
    def test_azt_naive(self, azt_summary):
        assert float(naive_estimate(azt_summary)) == pytest.approx(-0.476, abs=0.001)
        assert naive_estimate(azt_summary) == Fraction(5, 14) - Fraction(5, 6)

    def test_equal_means(self):
        assert naive_estimate(AteSummary(0.3, 0.3, 0.5)) == 0.0

    def test_cholestyramine_outcome_margin(self):
        s = AteSummary.from_law(empirical_law(cholestyramine_counts()))
        assert naive_estimate(s) == pytest.approx(0.473 + 0.073 - 0.081, abs=1e-12)

    def test_sign_flip_threshold(self):
        scen = ConfounderScenario(gamma0=-0.6, gamma1=0.8)  # product -0.48
        assert bias_adjusted_naive(-0.48, scen) == pytest.approx(0.0)

    def test_zero_gamma0_unchanged(self):
        assert bias_adjusted_naive(-0.48, ConfounderScenario(0.0, 0.7)) == -0.48

    def test_arithmetic(self):
        assert bias_adjusted_naive(-0.48, ConfounderScenario(0.5, 0.2)) == \
            pytest.approx(-0.58)

    @given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
    @settings(max_examples=200)
    def test_antisymmetry_and_linearity(self, g0, g1, naive):
        flipped = bias_adjusted_naive(naive, ConfounderScenario(-g0, -g1))
        assert flipped == pytest.approx(bias_adjusted_naive(naive, ConfounderScenario(g0, g1)),
                                        abs=1e-12)
        half = bias_adjusted_naive(naive, ConfounderScenario(g0 / 2, g1))
        assert naive - half == pytest.approx((naive - bias_adjusted_naive(
            naive, ConfounderScenario(g0, g1))) / 2, abs=1e-12)

    def test_scenario_validation(self):
        with pytest.raises(ValidationError):
            ConfounderScenario(gamma0=1.5, gamma1=0.0)


class TestGamma0Feasible:
    def test_azt_gamma1_one(self, azt_summary):
        iv = gamma0_feasible(azt_summary, 1.0)
        assert iv.lo == max(Fraction(5, 14) - 1, -Fraction(5, 6)) == Fraction(-9, 14)
        assert iv.hi == min(Fraction(5, 14), Fraction(1, 6)) == Fraction(1, 6)
        assert float(iv.lo) == pytest.approx(-0.643, abs=5e-4)
        assert float(iv.hi) == pytest.approx(0.167, abs=5e-4)

    def test_gamma1_zero_unrestricted(self, azt_summary):
        assert gamma0_feasible(azt_summary, 0.0) == Interval(-1, 1)

    def test_boundary_means(self):
        s = AteSummary(mean_y1=1.0, mean_y0=0.0, p1=0.5)
        assert gamma0_feasible(s, 1.0) == Interval(0, 1)


class TestStratified:
    def test_single_stratum_matches_unstratified(self):
        counts = azt_counts()
        sc = StratifiedCounts(strata=(Stratum("all", 1.0, counts),))
        direct = no_assumption_bounds(AteSummary.from_counts(counts))
        assert stratified_bounds(sc, no_assumption_bounds) == direct

    def test_identical_strata_match_unstratified(self):
        counts = azt_counts()
        sc = StratifiedCounts(strata=(Stratum("a", 0.5, counts),
                                      Stratum("b", 0.5, counts)))
        direct = no_assumption_bounds(AteSummary.from_counts(counts))
        got = stratified_bounds(sc, no_assumption_bounds)
        assert float(got.lo) == pytest.approx(float(direct.lo), abs=1e-12)
        assert float(got.hi) == pytest.approx(float(direct.hi), abs=1e-12)

    @given(st.lists(st.integers(min_value=1, max_value=500), min_size=8, max_size=8))
    @settings(max_examples=200)
    def test_mixture_tightens_pooled(self, cells):
        a = TwoArmCounts(*cells[:4])
        b = TwoArmCounts(*cells[4:])
        pooled = TwoArmCounts(*(x + y for x, y in zip(cells[:4], cells[4:])))
        sc = StratifiedCounts(strata=(
            Stratum("a", a.total / pooled.total, a),
            Stratum("b", b.total / pooled.total, b)))
        mixed = stratified_bounds(sc, no_assumption_bounds)
        outer = no_assumption_bounds(AteSummary.from_counts(pooled))
        assert outer.contains_interval(mixed, tol=1e-9)

    def test_error_carries_stratum_label(self):
        sc = StratifiedCounts(strata=(
            Stratum("okay", 0.5, azt_counts()),
            Stratum("bad", 0.5, azt_counts())))

        def failing(summary):
            raise ValidationError("boom")

        with pytest.raises(ValidationError, match="bad|okay"):
            stratified_bounds(sc, failing)


def test_rescale_interval():
    iv = rescale_interval(Interval(-0.5, 0.25), 10.0, 30.0)
    assert iv == Interval(-10.0, 5.0)
    with pytest.raises(ValidationError):
        rescale_interval(Interval(0, 1), 2.0, 2.0)
