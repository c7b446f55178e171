"""Sampler, Adadelta, projection/backtracking, and full training-loop tests."""

import math

import numpy as np
import pytest

from sentlis.domain import CascadeRecord, ConfigurationError, Dataset, ParameterStore
from sentlis.model import cascade_log_likelihood
from sentlis.sampling import NegativeSampler, compute_frequencies, sample_negatives
from sentlis.training import (
    AdadeltaState,
    TrainerConfig,
    adadelta_step,
    batch_objective,
    batch_value_and_gradients,
    project_nonnegative,
    projected_backtracking_update,
    train,
)


def chain_cascade(cid, users, start=0.0, gap=1.0, sentiment=0, extra=1.0):
    events = tuple((u, start + i * gap) for i, u in enumerate(users))
    return CascadeRecord(cid, sentiment, events, events[-1][1] + extra)


def small_dataset(m=6):
    cascades = [
        chain_cascade("a", [0, 1, 2]),
        chain_cascade("b", [1, 2, 3]),
        chain_cascade("c", [0, 2, 4]),
    ]
    return Dataset(cascades, M=m, K=1)


# --- negative sampler ---------------------------------------------------------

class TestNegativeSampler:
    def test_power_weights_exact(self):
        freq = np.zeros(3)
        freq[0] = 16.0
        freq[1] = 1.0
        sampler = NegativeSampler(freq)
        assert sampler.weights[0] == 8.0
        assert sampler.weights[1] == 1.0
        assert sampler.weights[2] == 0.0

    def test_absent_user_never_sampled(self):
        sampler = NegativeSampler(np.array([16.0, 1.0, 0.0]))
        rng = np.random.default_rng(0)
        draws = sampler.sample(frozenset(), 5000, rng)
        assert 2 not in draws

    def test_empirical_ratio_matches_weights(self):
        sampler = NegativeSampler(np.array([16.0, 1.0]))
        rng = np.random.default_rng(1)
        draws = np.array(sampler.sample(frozenset(), 10**6, rng))
        empirical = np.bincount(draws, minlength=2) / draws.size
        analytic = np.array([8.0, 1.0]) / 9.0
        assert np.abs(empirical - analytic).sum() < 0.01

    def test_frequencies_count_cascades(self):
        dataset = small_dataset()
        sampler = compute_frequencies(dataset)
        assert sampler.frequencies[0] == 2
        assert sampler.frequencies[2] == 3
        assert sampler.frequencies[5] == 0

    def test_all_zero_frequencies_rejected(self):
        with pytest.raises(ConfigurationError):
            NegativeSampler(np.zeros(4))

    def test_sample_zero_count(self):
        sampler = compute_frequencies(small_dataset())
        rng = np.random.default_rng(2)
        assert sample_negatives(sampler, small_dataset().cascades[0], 0, rng) == []

    def test_forced_single_candidate(self):
        sampler = NegativeSampler(np.array([4.0, 9.0, 25.0]))
        rng = np.random.default_rng(3)
        cascade = chain_cascade("x", [0, 1])
        assert sample_negatives(sampler, cascade, 4, rng) == [2, 2, 2, 2]

    def test_exclusion_renormalizes(self):
        sampler = NegativeSampler(np.array([16.0, 1.0, 16.0, 2.0]))
        rng = np.random.default_rng(4)
        cascade = chain_cascade("x", [0, 3], gap=1.0)
        draws = np.array(sampler.sample(cascade.user_set, 200000, rng))
        assert 0 not in draws and 3 not in draws
        empirical = np.bincount(draws, minlength=4) / draws.size
        analytic = sampler.probabilities(cascade.user_set)
        assert np.abs(empirical - analytic).sum() < 0.01

    def test_no_candidates_is_config_error(self):
        sampler = NegativeSampler(np.array([4.0, 9.0, 0.0]))
        cascade = chain_cascade("x", [0, 1])
        with pytest.raises(ConfigurationError):
            sample_negatives(sampler, cascade, 1, np.random.default_rng(0))

    def test_resampled_sets_differ_across_iterations(self):
        sampler = NegativeSampler(np.array([1.0, 1.0, 1.0, 1.0, 1.0, 0.0]))
        cascade = chain_cascade("x", [0, 1])
        rng = np.random.default_rng(5)
        sets = {tuple(sample_negatives(sampler, cascade, 3, rng)) for _ in range(100)}
        assert len(sets) > 1


# --- Adadelta -------------------------------------------------------------------

class TestAdadelta:
    def test_zero_gradient_decays(self):
        state = AdadeltaState((2,))
        state.grad_sq[:] = 1.0
        state.delta_sq[:] = 0.5
        delta = adadelta_step(np.zeros(2), state, rho=0.95, epsilon=1e-6)
        np.testing.assert_array_equal(delta, 0.0)
        np.testing.assert_allclose(state.grad_sq, 0.95)
        np.testing.assert_allclose(state.delta_sq, 0.475)

    def test_first_touch_known_value(self):
        state = AdadeltaState((1,))
        delta = adadelta_step(np.array([1.0]), state, rho=0.95, epsilon=1e-6)
        assert state.grad_sq[0] == pytest.approx(0.05)
        assert delta[0] == pytest.approx(-0.0044721, abs=1e-7)
        assert state.delta_sq[0] == pytest.approx(0.05 * delta[0] ** 2)

    def test_first_touch_scaling_saturates(self):
        # on first touch the step opposes the gradient and its magnitude
        # approaches sqrt(eps / (1 - rho)) as the gradient grows
        limit = math.sqrt(1e-6 / 0.05)
        magnitudes = []
        for c in (1.0, 10.0, 1e3, 1e6):
            state = AdadeltaState((1,))
            delta = adadelta_step(np.array([c]), state, rho=0.95, epsilon=1e-6)
            assert delta[0] < 0
            magnitudes.append(-delta[0])
        assert magnitudes == sorted(magnitudes)
        assert magnitudes[-1] == pytest.approx(limit, rel=1e-3)

    def test_sign_opposes_gradient(self):
        state = AdadeltaState((3,))
        g = np.array([1.0, -2.0, 0.0])
        delta = adadelta_step(g, state, rho=0.9, epsilon=1e-6)
        assert delta[0] < 0 and delta[1] > 0 and delta[2] == 0


# --- projection and backtracking -------------------------------------------------

class TestProjectedBacktracking:
    def test_projection_definition(self):
        out = project_nonnegative(np.array([-0.3, 0.3]))
        np.testing.assert_array_equal(out, [0.0, 0.3])

    def test_descent_step_accepted(self):
        rng = np.random.default_rng(7)
        dataset = small_dataset()
        params = ParameterStore.random(dataset.M, 1, 2, rng)
        batch = dataset.cascades
        negatives = {c.cascade_id: [5] for c in batch}
        _, grad_i, grad_s = batch_value_and_gradients(batch, params, negatives)
        # a small true-gradient step should pass sufficient decrease
        updated, outcome = projected_backtracking_update(
            params, -0.01 * grad_i, -0.01 * grad_s, batch, negatives)
        assert outcome.accepted
        assert outcome.objective_after <= outcome.objective_before
        assert outcome.decrease <= outcome.decrease_bound
        assert updated.influence.min() >= 0

    def test_adversarial_step_shrinks_until_decrease(self):
        rng = np.random.default_rng(8)
        dataset = small_dataset()
        params = ParameterStore.random(dataset.M, 1, 2, rng)
        batch = dataset.cascades
        negatives = {c.cascade_id: [5] for c in batch}
        _, grad_i, grad_s = batch_value_and_gradients(batch, params, negatives)
        updated, outcome = projected_backtracking_update(
            params, -50.0 * grad_i, -50.0 * grad_s, batch, negatives)
        assert outcome.accepted
        assert outcome.backtracks > 0
        assert outcome.objective_after < outcome.objective_before

    def test_exhausted_backtracks_keep_parameters(self):
        rng = np.random.default_rng(9)
        dataset = small_dataset()
        params = ParameterStore.random(dataset.M, 1, 2, rng)
        batch = dataset.cascades
        negatives = {c.cascade_id: [5] for c in batch}
        _, grad_i, grad_s = batch_value_and_gradients(batch, params, negatives)
        before = params.copy()
        # an ascent step can never satisfy the condition; give it no retries
        updated, outcome = projected_backtracking_update(
            params, +10.0 * grad_i, +10.0 * grad_s, batch, negatives,
            max_backtracks=0)
        assert not outcome.accepted
        assert updated == before

    def test_zero_update_accepted_with_equality(self):
        rng = np.random.default_rng(10)
        dataset = small_dataset()
        params = ParameterStore.random(dataset.M, 1, 2, rng)
        batch = dataset.cascades
        negatives = {c.cascade_id: [5] for c in batch}
        updated, outcome = projected_backtracking_update(
            params, np.zeros_like(params.influence),
            np.zeros_like(params.susceptibility), batch, negatives)
        assert outcome.accepted
        assert outcome.decrease == 0.0 == outcome.decrease_bound
        assert updated == params


# --- training loop ----------------------------------------------------------------

class TestTrain:
    def test_zero_epochs_returns_initialization(self):
        dataset = small_dataset()
        config = TrainerConfig(max_epochs=0, seed=42)
        result = train(dataset, config, dim=2)
        fresh = ParameterStore.random(dataset.M, 1, 2, np.random.default_rng(42))
        assert result.params == fresh
        assert result.epochs_run == 0

    def test_fixed_seed_bit_identical(self):
        dataset = small_dataset()
        config = TrainerConfig(max_epochs=4, seed=7, negative_samples=2)
        a = train(dataset, config, dim=2)
        b = train(dataset, config, dim=2)
        assert a.params == b.params
        assert [e.objective for e in a.log] == [e.objective for e in b.log]

    def test_nonnegative_and_sufficient_decrease_throughout(self):
        dataset = small_dataset()
        config = TrainerConfig(max_epochs=5, seed=3, negative_samples=2)
        result = train(dataset, config, dim=2, record_steps=True)
        assert result.steps
        for step in result.steps:
            assert step.min_parameter >= 0.0
            if step.accepted:
                assert step.decrease <= step.decrease_bound + 1e-12

    def test_accepted_steps_decrease_single_cascade_objective(self):
        # batch == full data, so every accepted step lowers the batch
        # objective relative to the pre-step parameters
        cascade = chain_cascade("solo", [0, 1, 2, 3])
        dataset = Dataset([cascade], M=5, K=1)
        config = TrainerConfig(max_epochs=6, seed=1, negative_samples=0, batch_size=1)
        result = train(dataset, config, dim=2, record_steps=True)
        for step in result.steps:
            if step.accepted and step.decrease_bound < 0:
                assert step.objective_after < step.objective_before

    def test_objective_improves_on_synthetic_chain(self):
        rng = np.random.default_rng(0)
        cascades = [chain_cascade(f"c{i}", list(rng.permutation(6)[:4])) for i in range(20)]
        dataset = Dataset(cascades, M=8, K=1)
        config = TrainerConfig(max_epochs=20, seed=5, negative_samples=2)
        result = train(dataset, config, dim=2)
        assert result.log[-1].objective < result.log[0].objective

    def test_single_row_model_on_multiclass_data(self):
        cascades = [chain_cascade("a", [0, 1, 2], sentiment=0),
                    chain_cascade("b", [2, 3, 0], sentiment=1)]
        dataset = Dataset(cascades, M=5, K=2)
        config = TrainerConfig(max_epochs=2, seed=11)
        result = train(dataset, config, dim=2, classes=1)
        assert result.params.K == 1

    def test_mismatched_class_count_rejected(self):
        dataset = small_dataset()  # K = 1
        initial = ParameterStore.zeros(dataset.M, 3, 2)
        with pytest.raises(ConfigurationError):
            train(dataset, TrainerConfig(max_epochs=1), initial=initial)

    def test_no_trainable_cascades_rejected(self):
        lone = CascadeRecord("x", 0, ((0, 0.0),), 1.0)
        dataset = Dataset([lone], M=2, K=1)
        with pytest.raises(ConfigurationError):
            train(dataset, TrainerConfig(max_epochs=1), dim=2)

    def test_initial_store_not_mutated(self):
        dataset = small_dataset()
        rng = np.random.default_rng(13)
        initial = ParameterStore.random(dataset.M, 1, 2, rng)
        snapshot = initial.copy()
        train(dataset, TrainerConfig(max_epochs=2, seed=1), initial=initial)
        assert initial == snapshot

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            TrainerConfig(rho=1.5).validate()
        with pytest.raises(ConfigurationError):
            TrainerConfig(beta=0.0).validate()
        with pytest.raises(ConfigurationError):
            TrainerConfig(max_epochs=-1).validate()
        TrainerConfig().validate()


class TestBatchHelpers:
    def test_batch_objective_matches_sum(self):
        rng = np.random.default_rng(21)
        dataset = small_dataset()
        params = ParameterStore.random(dataset.M, 1, 2, rng)
        negatives = {c.cascade_id: [5] for c in dataset.cascades}
        total = batch_objective(dataset.cascades, params, negatives)
        manual = -sum(cascade_log_likelihood(c, params, [5]) for c in dataset.cascades)
        assert total == pytest.approx(manual, rel=1e-12)

    def test_gradients_accumulate_over_batch(self):
        rng = np.random.default_rng(22)
        dataset = small_dataset()
        params = ParameterStore.random(dataset.M, 1, 2, rng)
        negatives = {c.cascade_id: [5] for c in dataset.cascades}
        _, grad_i, _ = batch_value_and_gradients(dataset.cascades, params, negatives)
        # user 2 is infected in all three cascades; finite difference the sum
        step = 1e-6
        orig = params.influence[2, 0, 0]
        params.influence[2, 0, 0] = orig + step
        up = batch_objective(dataset.cascades, params, negatives)
        params.influence[2, 0, 0] = orig - step
        down = batch_objective(dataset.cascades, params, negatives)
        params.influence[2, 0, 0] = orig
        assert grad_i[2, 0, 0] == pytest.approx((up - down) / (2 * step), rel=1e-4)
