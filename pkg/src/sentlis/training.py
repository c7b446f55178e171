"""Mini-batch projected stochastic gradient descent with Adadelta step sizes.

Each iteration processes one shuffled batch of cascades: negatives are
resampled per cascade, gradients of the batch objective are accumulated,
Adadelta proposes an update, and a backtracking loop shrinks the update by
``beta`` until the projected step satisfies the sufficient-decrease
condition

    O(E') - O(E) <= sigma * Tr(grad_O(E)^T (E' - E))

evaluated on the batch objective with the batch's negative samples held
fixed.  If the condition never holds within ``max_backtracks`` shrinkages
the parameters are left unchanged for that batch.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import IO, Callable, Sequence

import numpy as np

from .domain import (
    CascadeRecord,
    ConfigurationError,
    Dataset,
    ParameterStore,
)
from .model import Adjacency, cascade_log_likelihood, cascade_value_and_gradients
from .sampling import compute_frequencies, sample_negatives


@dataclass
class TrainerConfig:
    batch_size: int = 12
    rho: float = 0.95
    epsilon: float = 1e-6
    sigma: float = 0.01
    beta: float = 0.5
    negative_samples: int = 5
    max_epochs: int = 50
    max_backtracks: int = 20
    seed: int = 0
    convergence_tol: float = 1e-5

    def validate(self) -> None:
        checks = [
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (0.0 < self.rho < 1.0, "rho must be in (0, 1)"),
            (self.epsilon > 0.0, "epsilon must be positive"),
            (0.0 < self.sigma < 1.0, "sigma must be in (0, 1)"),
            (0.0 < self.beta < 1.0, "beta must be in (0, 1)"),
            (self.negative_samples >= 0, "negative_samples must be >= 0"),
            (self.max_epochs >= 0, "max_epochs must be >= 0"),
            (self.max_backtracks >= 0, "max_backtracks must be >= 0"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigurationError(message)


class AdadeltaState:
    """Decayed accumulators of squared gradients and squared updates."""

    def __init__(self, shape: tuple[int, ...]):
        self.grad_sq = np.zeros(shape)
        self.delta_sq = np.zeros(shape)


def adadelta_step(grad: np.ndarray, state: AdadeltaState, rho: float,
                  epsilon: float) -> np.ndarray:
    """One Adadelta update proposal; mutates the accumulators.

    E[g^2] is decayed with the new gradient before the step, E[d^2] with the
    proposed (un-backtracked) step after it.
    """
    state.grad_sq = rho * state.grad_sq + (1.0 - rho) * grad * grad
    delta = -np.sqrt((state.delta_sq + epsilon) / (state.grad_sq + epsilon)) * grad
    state.delta_sq = rho * state.delta_sq + (1.0 - rho) * delta * delta
    return delta


def project_nonnegative(x: np.ndarray) -> np.ndarray:
    """The projection onto the non-negative orthant."""
    return np.maximum(x, 0.0)


@dataclass
class BacktrackOutcome:
    accepted: bool
    backtracks: int
    objective_before: float
    objective_after: float
    decrease: float          # O(E') - O(E) at the final trial
    decrease_bound: float    # sigma * Tr(grad^T (E' - E)) at the final trial


def backtrack_projected_step(
    arrays: Sequence[np.ndarray],
    deltas: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    objective_at: Callable[[list[np.ndarray]], float],
    objective_before: float,
    sigma: float,
    beta: float,
    max_backtracks: int,
) -> tuple[list[np.ndarray] | None, BacktrackOutcome]:
    """Shrink-and-reproject until sufficient decrease; None means rejected."""
    trial = [d.copy() for d in deltas]
    shrinks = 0
    while True:
        candidate = [project_nonnegative(a + d) for a, d in zip(arrays, trial)]
        objective_after = objective_at(candidate)
        bound = sigma * sum(
            float(np.sum(g * (c - a)))
            for g, c, a in zip(grads, candidate, arrays))
        decrease = objective_after - objective_before
        if decrease <= bound:
            return candidate, BacktrackOutcome(True, shrinks, objective_before,
                                               objective_after, decrease, bound)
        if shrinks >= max_backtracks:
            return None, BacktrackOutcome(False, shrinks, objective_before,
                                          objective_after, decrease, bound)
        for d in trial:
            d *= beta
        shrinks += 1


def batch_objective(cascades: Sequence[CascadeRecord], params: ParameterStore,
                    negatives: dict[str, list[int]],
                    adjacency: Adjacency = None) -> float:
    return -sum(
        cascade_log_likelihood(c, params, negatives[c.cascade_id], adjacency)
        for c in cascades)


def batch_value_and_gradients(cascades: Sequence[CascadeRecord],
                              params: ParameterStore,
                              negatives: dict[str, list[int]],
                              adjacency: Adjacency = None):
    """Batch objective and dense gradient tensors in one pass."""
    grad_i = np.zeros_like(params.influence)
    grad_s = np.zeros_like(params.susceptibility)
    loglik = 0.0
    for c in cascades:
        value, grads = cascade_value_and_gradients(
            c, params, negatives[c.cascade_id], adjacency)
        loglik += value
        for user, mat in grads.d_influence.items():
            grad_i[user] += mat
        for user, mat in grads.d_susceptibility.items():
            grad_s[user] += mat
    return -loglik, grad_i, grad_s


def projected_backtracking_update(
    params: ParameterStore,
    d_influence: np.ndarray,
    d_susceptibility: np.ndarray,
    batch: Sequence[CascadeRecord],
    negatives: dict[str, list[int]],
    adjacency: Adjacency = None,
    sigma: float = 0.01,
    beta: float = 0.5,
    max_backtracks: int = 20,
) -> tuple[ParameterStore, BacktrackOutcome]:
    """Apply one projected update with sufficient-decrease backtracking.

    Returns the accepted store (the input store, unchanged, when every trial
    fails) and the outcome of the final trial.
    """
    objective_before, grad_i, grad_s = batch_value_and_gradients(
        batch, params, negatives, adjacency)

    def objective_at(candidate: list[np.ndarray]) -> float:
        return batch_objective(batch, ParameterStore(*candidate), negatives, adjacency)

    accepted, outcome = backtrack_projected_step(
        (params.influence, params.susceptibility),
        (d_influence, d_susceptibility),
        (grad_i, grad_s),
        objective_at, objective_before, sigma, beta, max_backtracks)
    if accepted is None:
        return params, outcome
    return ParameterStore(accepted[0], accepted[1]), outcome


@dataclass
class EpochLogEntry:
    epoch: int
    objective: float
    backtracks: int
    wall_ms: int

    def to_json(self) -> str:
        return json.dumps({"epoch": self.epoch, "objective": self.objective,
                           "backtracks": self.backtracks, "wall_ms": self.wall_ms})


@dataclass
class StepRecord:
    epoch: int
    iteration: int
    accepted: bool
    backtracks: int
    objective_before: float
    objective_after: float
    decrease: float
    decrease_bound: float
    min_parameter: float


@dataclass
class TrainResult:
    params: ParameterStore
    epochs_run: int
    converged: bool
    log: list[EpochLogEntry] = field(default_factory=list)
    steps: list[StepRecord] | None = None


def _single_class_view(dataset: Dataset) -> Dataset:
    cascades = [CascadeRecord(c.cascade_id, 0, c.events, c.t_end)
                for c in dataset.cascades]
    return Dataset(cascades=cascades, M=dataset.M, K=1,
                   adjacency=dataset.adjacency, parents=dataset.parents)


def train(dataset: Dataset, config: TrainerConfig,
          initial: ParameterStore | str = "random",
          dim: int = 8, classes: int | None = None,
          log_stream: IO[str] | None = None,
          record_steps: bool = False) -> TrainResult:
    """Run shuffled mini-batch SGD over the dataset's trainable cascades.

    ``initial`` is either a ParameterStore (copied, never mutated) or
    "random" for uniform entries in [0, 0.1/D] drawn from the config seed.
    A model with a single sentiment row may be trained on multi-class data;
    every cascade then uses row 0.  The per-epoch objective in the returned
    log is evaluated on the full trainable set with one fixed negative
    sample set, so epochs are comparable; it also drives the convergence
    test (relative change below ``convergence_tol`` stops training).
    """
    config.validate()
    rng = np.random.default_rng(config.seed)

    if isinstance(initial, ParameterStore):
        params = initial.copy()
        if params.M != dataset.M:
            raise ConfigurationError(
                f"initial store covers {params.M} users, dataset has {dataset.M}")
    elif initial == "random":
        k = classes if classes is not None else dataset.K
        params = ParameterStore.random(dataset.M, k, dim, rng)
    else:
        raise ConfigurationError(f"unknown initialization {initial!r}")

    if params.K != dataset.K:
        if params.K != 1:
            raise ConfigurationError(
                f"model has {params.K} sentiment rows, dataset has {dataset.K}")
        dataset = _single_class_view(dataset)

    trainable = dataset.trainable_cascades()
    if not trainable:
        raise ConfigurationError("no trainable cascades (need at least 2 events)")

    sampler = compute_frequencies(dataset)
    fixed_negatives = {
        c.cascade_id: sample_negatives(sampler, c, config.negative_samples, rng)
        for c in trainable}

    result = TrainResult(params=params, epochs_run=0, converged=False,
                         steps=[] if record_steps else None)
    if config.max_epochs == 0:
        return result

    state_i = AdadeltaState(params.influence.shape)
    state_s = AdadeltaState(params.susceptibility.shape)
    adjacency = dataset.adjacency
    previous_objective = batch_objective(trainable, params, fixed_negatives, adjacency)
    iteration = 0

    for epoch in range(1, config.max_epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(len(trainable))
        epoch_backtracks = 0
        for lo in range(0, len(trainable), config.batch_size):
            batch = [trainable[i] for i in order[lo:lo + config.batch_size]]
            negatives = {
                c.cascade_id: sample_negatives(sampler, c, config.negative_samples, rng)
                for c in batch}
            objective_before, grad_i, grad_s = batch_value_and_gradients(
                batch, params, negatives, adjacency)
            d_i = adadelta_step(grad_i, state_i, config.rho, config.epsilon)
            d_s = adadelta_step(grad_s, state_s, config.rho, config.epsilon)

            def objective_at(candidate: list[np.ndarray]) -> float:
                return batch_objective(batch, ParameterStore(*candidate),
                                       negatives, adjacency)

            accepted, outcome = backtrack_projected_step(
                (params.influence, params.susceptibility), (d_i, d_s),
                (grad_i, grad_s), objective_at, objective_before,
                config.sigma, config.beta, config.max_backtracks)
            if accepted is not None:
                params.influence, params.susceptibility = accepted
            epoch_backtracks += outcome.backtracks
            iteration += 1
            if record_steps:
                result.steps.append(StepRecord(
                    epoch=epoch, iteration=iteration,
                    accepted=outcome.accepted, backtracks=outcome.backtracks,
                    objective_before=outcome.objective_before,
                    objective_after=outcome.objective_after,
                    decrease=outcome.decrease,
                    decrease_bound=outcome.decrease_bound,
                    min_parameter=float(min(params.influence.min(),
                                            params.susceptibility.min())),
                ))

        epoch_objective = batch_objective(trainable, params, fixed_negatives, adjacency)
        entry = EpochLogEntry(
            epoch=epoch, objective=epoch_objective, backtracks=epoch_backtracks,
            wall_ms=int((time.perf_counter() - started) * 1000))
        result.log.append(entry)
        if log_stream is not None:
            log_stream.write(entry.to_json())
            log_stream.write("\n")
        result.epochs_run = epoch
        denom = max(abs(previous_objective), 1e-12)
        if abs(epoch_objective - previous_objective) / denom < config.convergence_tol:
            result.converged = True
            break
        previous_objective = epoch_objective

    return result
