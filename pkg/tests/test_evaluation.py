"""Metric definitions, ranking invariances, k-fold properties, and the
scale-based simulator's closed-form calibration."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sentlis.baselines import PairwiseRateModel, PairwiseRates
from sentlis.domain import CascadeRecord, ConfigurationError, Dataset, ParameterStore
from sentlis.evaluation import (
    auc_score,
    csp,
    format_report_table,
    kfold_split,
    log_infection_scores,
    mape,
    mean_reciprocal_rank,
    pcd,
    pcd_auc,
    pcd_mrr,
    wbr,
    worst_rank,
    EvalReport,
    MetricSummary,
)
from sentlis.model import LatentRateModel
from sentlis.simulate import run_scale_simulation, scale_infection_probability


def cascade(cid, pairs, t_end_extra=1.0, sentiment=0):
    events = tuple(pairs)
    return CascadeRecord(cid, sentiment, events, events[-1][1] + t_end_extra)


class TestScalarMetrics:
    def test_auc_fixed_set(self):
        assert auc_score([0.9, 0.4], [0.5, 0.1]) == 0.75

    def test_auc_perfect_separation(self):
        assert auc_score([3.0, 2.0], [1.0, 0.5, 0.1]) == 1.0

    def test_auc_all_ties(self):
        assert auc_score([1.0, 1.0], [1.0, 1.0, 1.0]) == 0.5

    def test_mrr_examples(self):
        assert mean_reciprocal_rank([1, 1, 1]) == 1.0
        assert mean_reciprocal_rank([1, 2, 4]) == pytest.approx(7 / 12)

    def test_mape_definition(self):
        assert mape([100.0], [80.0]) == pytest.approx(0.2)

    def test_worst_rank_ties(self):
        scores = np.array([0.5, 0.9, 0.5, 0.2])
        assert worst_rank(scores, 1) == 1
        assert worst_rank(scores, 0) == 3  # tied with another 0.5
        assert worst_rank(scores, 3) == 4

    # scores on a coarse grid: an affine float transform is only strictly
    # monotone when distinct values stay further apart than rounding error
    grid_floats = st.floats(-5, 5).map(lambda x: round(x, 6))

    @given(st.lists(grid_floats, min_size=1, max_size=20),
           st.lists(grid_floats, min_size=1, max_size=20),
           st.floats(0.1, 3.0), st.floats(-2.0, 2.0))
    def test_auc_invariant_under_monotone_transform(self, pos, neg, a, b):
        before = auc_score(pos, neg)
        after = auc_score([a * x + b for x in pos], [a * x + b for x in neg])
        assert before == pytest.approx(after, abs=1e-12)

    def test_metric_ranges(self):
        rng = np.random.default_rng(0)
        pos, neg = rng.normal(size=10), rng.normal(size=15)
        assert 0.0 <= auc_score(pos, neg) <= 1.0
        ranks = rng.integers(1, 50, size=20)
        assert 0.0 < mean_reciprocal_rank(ranks) <= 1.0
        assert mape([10.0, 20.0], [12.0, 15.0]) >= 0.0


def uniform_params(m, k=1, d=2, value=0.3):
    return ParameterStore(np.full((m, k, d), value), np.full((m, k, d), value))


class TestPcd:
    def test_positive_ranked_model(self):
        # strong 0->1 edge, everything else zero: the infected user 1 should
        # outscore immune users
        rates = PairwiseRates({(0, 1): 0.9})
        model = PairwiseRateModel(rates)
        cascades = [cascade("c", [(0, 0.0), (1, 1.0)])]
        value, per_cascade, skipped = pcd_auc(cascades, model, n_users=5)
        assert value == 1.0
        assert skipped == 0
        mrr, n_events = pcd_mrr(cascades, model, n_users=5)
        assert mrr == 1.0 and n_events == 1

    def test_all_users_infected_skips_cascade(self):
        model = LatentRateModel(uniform_params(2))
        cascades = [cascade("c", [(0, 0.0), (1, 1.0)])]
        value, _, skipped = pcd_auc(cascades, model, n_users=2)
        assert skipped == 1 and math.isnan(value)

    def test_random_scores_mrr_low(self):
        rng = np.random.default_rng(1)
        m = 100

        class RandomModel:
            def rate_matrix(self, sources, targets, k):
                return rng.uniform(0, 1, size=(len(sources), len(targets)))

        cascades = [cascade(f"c{i}", [(2 * i, 0.0), (2 * i + 1, 1.0)]) for i in range(30)]
        mrr, _ = pcd_mrr(cascades, RandomModel(), n_users=m)
        assert mrr < 0.1

    def test_pooled_mode_differs_only_in_aggregation(self):
        model = LatentRateModel(uniform_params(6))
        cascades = [cascade("a", [(0, 0.0), (1, 1.0)]),
                    cascade("b", [(2, 0.0), (3, 4.0)])]
        averaged = pcd(cascades, model, 6)
        pooled = pcd(cascades, model, 6, pooled=True)
        assert set(averaged.per_cascade_auc) == {"a", "b"}
        assert 0.0 <= pooled.auc <= 1.0


class TestWbr:
    def test_single_candidate_forced(self):
        model = LatentRateModel(uniform_params(4))
        c = cascade("c", [(0, 0.0), (1, 1.0)])
        result = wbr([c], {("c", 1): 0}, model)
        assert result.accuracy == 1.0 and result.mrr == 1.0

    def test_argmax_prediction(self):
        rates = PairwiseRates({(0, 2): 0.3, (1, 2): 0.5})
        model = PairwiseRateModel(rates)
        c = cascade("c", [(0, 0.0), (1, 0.0), (2, 1.0)])
        result = wbr([c], {("c", 2): 1}, model)
        assert result.accuracy == 1.0

    def test_missing_parent_excluded(self):
        model = LatentRateModel(uniform_params(4))
        c = cascade("c", [(0, 0.0), (1, 1.0), (2, 2.0)])
        result = wbr([c], {("c", 2): 0}, model)
        assert result.scored_events == 1
        assert result.excluded_missing_parent == 1

    def test_parent_not_earlier_excluded(self):
        model = LatentRateModel(uniform_params(4))
        c = cascade("c", [(0, 0.0), (1, 1.0)])
        # recorded parent is not an earlier-infected user of this cascade
        result = wbr([c], {("c", 1): 3}, model)
        assert result.scored_events == 0
        assert result.excluded_invalid_parent == 1

    def test_ranking_by_pairwise_density(self):
        # two earlier users at different elapsed times, equal rates: the
        # more recent influencer has higher density and should rank first
        model = LatentRateModel(uniform_params(4, value=0.5))
        c = cascade("c", [(0, 0.0), (1, 3.0), (2, 4.0)])
        result = wbr([c], {("c", 2): 1}, model)
        assert result.accuracy == 1.0


class TestCsp:
    def test_zero_rates_predict_seed_count(self):
        model = LatentRateModel(ParameterStore.zeros(6, 1, 2))
        c = cascade("c", [(i, float(i)) for i in range(5)])
        result = csp([c], model, n_users=6, seed_count=2, n_sims=10, n_scales=5)
        truth, predicted = result.per_cascade["c"]
        assert predicted == 2.0
        assert result.mape == pytest.approx((5 - 2) / 5)

    def test_short_cascade_excluded(self):
        model = LatentRateModel(ParameterStore.zeros(6, 1, 2))
        c = cascade("c", [(0, 0.0), (1, 1.0)])
        result = csp([c], model, n_users=6, seed_count=10)
        assert result.excluded_cascades == 1
        assert math.isnan(result.mape)

    def test_two_user_closed_form(self):
        # rate 1 pair, one scale over (0, 1]: infection probability 1/2
        rates = PairwiseRates({(0, 1): 1.0})
        model = PairwiseRateModel(rates)
        hits = 0
        n = 100_000
        rng = np.random.default_rng(2)
        for _ in range(n):
            new = run_scale_simulation(model, 0, [(0, 0.0)], 2, 0.0, 1.0, 1, rng)
            hits += len(new)
        assert hits / n == pytest.approx(0.5, abs=0.02 * 0.5)

    def test_or_composition_matches_complement_product(self):
        # two influencers attack one target in a single scale; infection
        # probability is 1 - (1-p_a)(1-p_b)
        rates = PairwiseRates({(0, 2): 0.8, (1, 2): 0.5})
        model = PairwiseRateModel(rates)
        p_a = scale_infection_probability(0.8, 0.0, 0.0, 1.0)
        p_b = scale_infection_probability(0.5, 0.0, 0.0, 1.0)
        analytic = 1.0 - (1.0 - p_a) * (1.0 - p_b)
        rng = np.random.default_rng(3)
        n = 100_000
        hits = 0
        for _ in range(n):
            new = run_scale_simulation(model, 0, [(0, 0.0), (1, 0.0)], 3,
                                       0.0, 1.0, 1, rng)
            hits += len(new)
        assert hits / n == pytest.approx(analytic, rel=0.01)

    def test_infected_become_infective_next_scale(self):
        # chain 0 -> 1 -> 2 with certain per-scale infection: user 2 can only
        # be reached after user 1 turns infective, i.e. from scale 2 on
        big = 50.0  # rate so large the scale probability is ~1
        rates = PairwiseRates({(0, 1): big, (1, 2): big})
        model = PairwiseRateModel(rates)
        rng = np.random.default_rng(4)
        new = run_scale_simulation(model, 0, [(0, 0.0)], 3, 0.0, 2.0, 2, rng)
        users = [inf.user for inf in new]
        assert users == [1, 2]
        assert new[0].time == 0.5 and new[1].time == 1.5
        assert new[0].parent == 0 and new[1].parent == 1

    def test_deterministic_given_seed(self):
        rates = PairwiseRates({(0, 1): 0.4, (0, 2): 0.7, (1, 2): 0.2})
        model = PairwiseRateModel(rates)
        c = cascade("c", [(0, 0.0), (1, 1.0), (2, 2.0)])
        a = csp([c], model, n_users=5, seed_count=2, n_sims=20, n_scales=5, seed=9)
        b = csp([c], model, n_users=5, seed_count=2, n_sims=20, n_scales=5, seed=9)
        assert a.per_cascade == b.per_cascade


class TestKfold:
    def make_dataset(self, n):
        cascades = [cascade(f"c{i}", [(0, 0.0), (1, 1.0)]) for i in range(n)]
        return Dataset(cascades, M=2, K=1)

    def test_each_fold_one_test_cascade(self):
        folds = kfold_split(self.make_dataset(10), k=10, seed=0)
        assert len(folds) == 10
        for train, test in folds:
            assert len(test.cascades) == 1
            assert len(train.cascades) == 9

    def test_paper_scale_fold_sizes(self):
        folds = kfold_split(self.make_dataset(737), k=10, seed=0)
        sizes = sorted(len(test.cascades) for _, test in folds)
        assert set(sizes) == {73, 74}
        assert sum(sizes) == 737

    def test_partition_property(self):
        dataset = self.make_dataset(23)
        folds = kfold_split(dataset, k=5, seed=1)
        seen = []
        for train, test in folds:
            ids = [c.cascade_id for c in test.cascades]
            seen.extend(ids)
            train_ids = {c.cascade_id for c in train.cascades}
            assert train_ids.isdisjoint(ids)
        assert sorted(seen) == sorted(c.cascade_id for c in dataset.cascades)

    def test_deterministic(self):
        dataset = self.make_dataset(12)
        a = kfold_split(dataset, k=3, seed=5)
        b = kfold_split(dataset, k=3, seed=5)
        for (_, ta), (_, tb) in zip(a, b):
            assert [c.cascade_id for c in ta.cascades] == [c.cascade_id for c in tb.cascades]

    def test_too_few_cascades(self):
        with pytest.raises(ConfigurationError):
            kfold_split(self.make_dataset(5), k=10)


class TestReports:
    def test_summary_recomputable(self):
        summary = MetricSummary.from_values([0.5, 0.7, 0.9])
        assert summary.mean == pytest.approx(np.mean(summary.per_fold), abs=1e-12)
        assert summary.sd == pytest.approx(np.std(summary.per_fold), abs=1e-12)

    def test_table_layout(self):
        reports = [
            EvalReport("pcd", "sent-lis",
                       {"AUC": MetricSummary.from_values([0.9, 0.8]),
                        "MRR": MetricSummary.from_values([0.02, 0.04])}),
            EvalReport("pcd", "ct-jaccard",
                       {"AUC": MetricSummary.from_values([0.7, 0.6])}),
        ]
        table = format_report_table(reports)
        lines = table.splitlines()
        assert lines[0].split() == ["model", "AUC", "MRR"]
        assert "sent-lis" in lines[2]
        assert lines[3].rstrip().endswith("-")  # missing metric placeholder


class TestLogScores:
    def test_matches_direct_mixture(self):
        rng = np.random.default_rng(5)
        params = ParameterStore(rng.uniform(0.1, 1, (5, 1, 2)),
                                rng.uniform(0.1, 1, (5, 1, 2)))
        model = LatentRateModel(params)
        earlier_users = np.array([0, 1])
        earlier_times = np.array([0.0, 1.0])
        t = 2.5
        scores = log_infection_scores(model, earlier_users, earlier_times, t,
                                      np.array([3, 4]), 0)
        for pos, v in enumerate((3, 4)):
            hazard_sum = sum(model.rate(j, v, 0) / (t - tj + 1)
                             for j, tj in zip(earlier_users, earlier_times))
            log_surv = sum(-model.rate(j, v, 0) * math.log(t - tj + 1)
                           for j, tj in zip(earlier_users, earlier_times))
            assert scores[pos] == pytest.approx(math.log(hazard_sum) + log_surv, rel=1e-12)
