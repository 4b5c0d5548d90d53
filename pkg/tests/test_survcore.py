import numpy as np
import pytest

from exsurv.survcore import (LogRankResult, StepFunction, censoring_distribution,
                             kaplan_meier, log_rank_test, nelson_aalen)


class TestStepFunction:
    def test_right_continuous_eval(self):
        f = StepFunction([1.0, 2.0, 4.0], [0.5, 0.3, 0.1], value_before_first=1.0)
        assert f(0.5) == 1.0
        assert f(1.0) == 0.5
        assert f(3.9) == 0.3
        assert f(100.0) == 0.1

    def test_left_limit(self):
        f = StepFunction([1.0, 2.0], [0.5, 0.25], value_before_first=1.0)
        assert f.left_limit(1.0) == 1.0
        assert f.left_limit(2.0) == 0.5
        assert f.left_limit(2.5) == 0.25

    def test_rejects_unsorted_breakpoints(self):
        with pytest.raises(ValueError):
            StepFunction([2.0, 1.0], [0.5, 0.2])


class TestKaplanMeier:
    def test_three_deaths_no_censoring(self):
        km = kaplan_meier([1, 2, 3], [1, 1, 1])
        assert np.allclose(km.values, [2 / 3, 1 / 3, 0.0], atol=1e-12)

    def test_all_censored_is_flat_one(self):
        km = kaplan_meier([1, 2, 3], [0, 0, 0])
        assert np.all(km.values == 1.0)
        assert km(10.0) == 1.0

    def test_hand_example_with_risk_set_shrink(self):
        # death@2, censor@1, death@3: S(2) = 1/2, S(3) = 0
        km = kaplan_meier([2, 1, 3], [1, 0, 1])
        assert km(2.0) == pytest.approx(0.5, abs=1e-12)
        assert km(3.0) == pytest.approx(0.0, abs=1e-12)

    def test_equals_empirical_survival_without_censoring(self):
        rng = np.random.default_rng(5)
        times = rng.integers(1, 20, size=40).astype(float)
        km = kaplan_meier(times, np.ones_like(times))
        for t in np.unique(times):
            assert km(t) == pytest.approx(np.mean(times > t), abs=1e-12)

    def test_death_processed_before_censoring_at_tie(self):
        # censored@2 must still be in the risk set for the death@2
        km = kaplan_meier([2, 2, 3], [1, 0, 1])
        assert km(2.0) == pytest.approx(2 / 3, abs=1e-12)

    def test_rejects_nonpositive_times(self):
        with pytest.raises(ValueError):
            kaplan_meier([0.0, 1.0], [1, 1])


class TestNelsonAalen:
    def test_hand_sum(self):
        na = nelson_aalen([1, 2, 3], [1, 1, 1])
        assert np.allclose(na.values, [1 / 3, 1 / 3 + 1 / 2, 1 / 3 + 1 / 2 + 1],
                           atol=1e-12)

    def test_all_censored_is_zero(self):
        na = nelson_aalen([4, 5], [0, 0])
        assert na(100.0) == 0.0

    def test_single_death(self):
        na = nelson_aalen([5.0], [1])
        assert na(5.0) == 1.0

    def test_bounded_by_neg_log_km(self):
        # -ln(1 - x) >= x per factor, so H_NA <= -ln(S_KM) wherever S > 0
        rng = np.random.default_rng(7)
        times = rng.exponential(10, size=30) + 0.1
        events = rng.uniform(size=30) < 0.7
        if not events.any():
            events[0] = True
        na = nelson_aalen(times, events)
        km = kaplan_meier(times, events)
        for t in na.breakpoints:
            s = km(t)
            if s > 0:
                assert na(t) <= -np.log(s) + 1e-12
                # first-order agreement when drops are small
                assert na(t) == pytest.approx(-np.log(s), rel=0.5)


class TestCensoringDistribution:
    def test_no_censoring_flat_one(self):
        g = censoring_distribution([1, 2, 3], [1, 1, 1])
        assert g(10.0) == 1.0

    def test_all_censored_is_empirical(self):
        g = censoring_distribution([1.0, 2.0, 3.0], [0, 0, 0])
        assert g(1.0) == pytest.approx(2 / 3)
        assert g(3.0) == pytest.approx(0.0)

    def test_hand_mixed_set(self):
        times = [1.0, 2.0, 3.0, 4.0]
        events = [1, 0, 1, 0]
        g = censoring_distribution(times, events)
        expected = kaplan_meier(times, [0, 1, 0, 1])
        assert np.allclose(g.breakpoints, expected.breakpoints)
        assert np.allclose(g.values, expected.values)

    def test_double_inversion_is_km(self):
        times = [2.0, 5.0, 7.0, 9.0, 9.0]
        events = np.array([1, 0, 1, 1, 0], dtype=bool)
        a = censoring_distribution(times, ~events)
        b = kaplan_meier(times, events)
        assert np.allclose(a.breakpoints, b.breakpoints)
        assert np.allclose(a.values, b.values)


class TestLogRank:
    def test_identical_groups(self):
        times = [1.0, 2.0, 3.0, 4.0]
        events = [1, 0, 1, 1]
        res = log_rank_test(times, events, times, events)
        assert res.statistic == 0.0
        assert res.p_value == 1.0

    def test_hand_separated_groups(self):
        # 5 deaths at t=1 vs 5 alive past t=10: chi2 = 2.5^2 / (25/36) = 9
        res = log_rank_test([1] * 5, [1] * 5, [10] * 5, [0] * 5)
        assert res.statistic == pytest.approx(9.0, abs=1e-12)
        assert res.observed == (5.0, 0.0)
        assert res.expected == (2.5, 2.5)

    def test_relabel_symmetry(self):
        rng = np.random.default_rng(3)
        ta, tb = rng.exponential(5, 12) + 0.1, rng.exponential(8, 15) + 0.1
        ea, eb = rng.uniform(size=12) < 0.6, rng.uniform(size=15) < 0.6
        ea[0] = True
        r1 = log_rank_test(ta, ea, tb, eb)
        r2 = log_rank_test(tb, eb, ta, ea)
        assert r1.statistic == pytest.approx(r2.statistic, abs=1e-12)

    def test_monotone_time_transform_invariance(self):
        rng = np.random.default_rng(4)
        ta, tb = rng.exponential(5, 10) + 0.1, rng.exponential(2, 10) + 0.1
        ea = np.ones(10, dtype=bool)
        eb = rng.uniform(size=10) < 0.5
        r1 = log_rank_test(ta, ea, tb, eb)
        r2 = log_rank_test(np.exp(ta / 5), ea, np.exp(tb / 5), eb)
        assert r1.statistic == pytest.approx(r2.statistic, rel=1e-12)

    def test_degenerate_full_overlap(self):
        res = log_rank_test([1.0], [1], [1.0], [1])
        assert isinstance(res, LogRankResult)
        assert res.degenerate
        assert res.statistic == 0.0
        assert res.p_value == 1.0

    def test_requires_an_event(self):
        with pytest.raises(ValueError):
            log_rank_test([1.0], [0], [2.0], [0])
