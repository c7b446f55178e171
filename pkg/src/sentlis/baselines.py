"""Pair-wise comparison models: counting estimators (Bernoulli and Jaccard
flavors) and a per-pair survival-likelihood model fine-tuned from the
Jaccard initialization.

All three expose the same scoring surface as the latent model, so the
evaluation tasks consume them unchanged: the per-pair rate plays the role
of the transmission rate, decaying as ``rate / (t - t_j + 1)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .domain import CascadeRecord, ConfigurationError, ContractViolation, Dataset
from .model import HAZARD_FLOOR
from .sampling import compute_frequencies, sample_negatives
from .training import AdadeltaState, TrainerConfig, adadelta_step, backtrack_projected_step

Pair = tuple[int, int]


@dataclass
class PairwiseRates:
    """Sparse ordered-pair rate map; absent pairs have rate zero."""

    rates: dict[Pair, float] = field(default_factory=dict)

    def get(self, j: int, i: int) -> float:
        return self.rates.get((j, i), 0.0)

    def copy(self) -> "PairwiseRates":
        return PairwiseRates(dict(self.rates))

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for (src, dst) in sorted(self.rates):
                fh.write(json.dumps({"src": src, "dst": dst,
                                     "rate": self.rates[(src, dst)]}))
                fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "PairwiseRates":
        rates: dict[Pair, float] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                rates[(int(obj["src"]), int(obj["dst"]))] = float(obj["rate"])
        return cls(rates)


def score_pairwise(rates: PairwiseRates, j: int, i: int, t: float, t_j: float) -> float:
    """Decayed propagation score, the pair-wise stand-in for the hazard."""
    if t < t_j:
        raise ContractViolation(f"t={t} earlier than influencer time t_j={t_j}")
    return rates.get(j, i) / (t - t_j + 1.0)


def _propagation_counts(dataset: Dataset):
    """Successes (j strictly before i), per-user and per-pair cascade counts."""
    success: dict[Pair, int] = {}
    n_with_user: dict[int, int] = {}
    n_with_both: dict[Pair, int] = {}
    for c in dataset.cascades:
        for u in c.user_set:
            n_with_user[u] = n_with_user.get(u, 0) + 1
        for a in range(len(c.events)):
            j, t_j = c.events[a]
            for b in range(a + 1, len(c.events)):
                i, t_i = c.events[b]
                key = (j, i) if j < i else (i, j)
                n_with_both[key] = n_with_both.get(key, 0) + 1
                if t_j < t_i:
                    success[(j, i)] = success.get((j, i), 0) + 1
    return success, n_with_user, n_with_both


def _both_count(n_with_both: dict[Pair, int], j: int, i: int) -> int:
    return n_with_both.get((j, i) if j < i else (i, j), 0)


def _apply_adjacency(rates: dict[Pair, float], dataset: Dataset) -> dict[Pair, float]:
    if dataset.adjacency is None:
        return rates
    return {pair: r for pair, r in rates.items() if pair in dataset.adjacency}


def fit_ct_bernoulli(dataset: Dataset, trials: str = "influencer") -> PairwiseRates:
    """Success fraction per ordered pair.

    ``trials`` picks the denominator: "influencer" counts every cascade in
    which j got infected as a trial; "cooccurrence" restricts trials to
    cascades containing both users.
    """
    if trials not in ("influencer", "cooccurrence"):
        raise ConfigurationError(f"unknown trial mode {trials!r}")
    success, n_with_user, n_with_both = _propagation_counts(dataset)
    rates: dict[Pair, float] = {}
    for (j, i), wins in success.items():
        denom = n_with_user[j] if trials == "influencer" else _both_count(n_with_both, j, i)
        rates[(j, i)] = wins / denom
    return PairwiseRates(_apply_adjacency(rates, dataset))


def fit_ct_jaccard(dataset: Dataset) -> PairwiseRates:
    """Successes over the number of cascades containing either user."""
    success, n_with_user, n_with_both = _propagation_counts(dataset)
    rates: dict[Pair, float] = {}
    for (j, i), wins in success.items():
        union = n_with_user[j] + n_with_user[i] - _both_count(n_with_both, j, i)
        rates[(j, i)] = wins / union
    return PairwiseRates(_apply_adjacency(rates, dataset))


# --- NetRate-style fine-tuning ------------------------------------------------

def _pairwise_cascade_terms(cascade: CascadeRecord, index: dict[Pair, int]):
    """Per-event support-pair indices and elapsed times, computed once."""
    terms = []
    n = cascade.size
    for i in range(1, n):
        n_earlier = cascade.earlier_count(i)
        target = int(cascade.users[i])
        idxs, deltas = [], []
        for pos in range(n_earlier):
            key = index.get((int(cascade.users[pos]), target))
            if key is not None:
                idxs.append(key)
                deltas.append(float(cascade.times[i]) - float(cascade.times[pos]) + 1.0)
        terms.append((np.array(idxs, dtype=np.int64), np.array(deltas)))
    return terms


def _pairwise_value_and_grad(cascades, terms_cache, index, theta,
                             negatives, want_grad=True):
    """Negative log-likelihood (and gradient) of the per-pair model."""
    phi = -np.expm1(-theta)
    one_minus = 1.0 - phi
    value = 0.0
    grad = np.zeros_like(theta) if want_grad else None
    for c in cascades:
        for idxs, deltas in terms_cache[c.cascade_id]:
            if idxs.size == 0:
                value += math.log(HAZARD_FLOOR)
                continue
            p = phi[idxs]
            log_d = np.log(deltas)
            hazard_sum = float(np.sum(p / deltas))
            value += math.log(max(hazard_sum, HAZARD_FLOOR))
            value -= float(np.sum(p * log_d))
            if want_grad:
                inv = 1.0 / hazard_sum if hazard_sum > HAZARD_FLOOR else 0.0
                np.add.at(grad, idxs, -(one_minus[idxs] * (inv / deltas - log_d)))
        for l in negatives[c.cascade_id]:
            for pos in range(c.size):
                key = index.get((int(c.users[pos]), l))
                if key is None:
                    continue
                w = math.log(c.t_end - float(c.times[pos]) + 1.0)
                value -= phi[key] * w
                if want_grad:
                    grad[key] += one_minus[key] * w
    return -value, grad


def fit_netrate(dataset: Dataset, init: PairwiseRates,
                config: TrainerConfig) -> PairwiseRates:
    """Fine-tune free per-pair rates by the same projected SGD machinery.

    Each observed pair carries one scalar, reparameterized as
    ``1 - exp(-theta)`` with theta >= 0 so the shared non-negative
    projection keeps rates inside [0, 1).  Pairs never observed in training
    stay at zero.
    """
    config.validate()
    support = sorted(pair for pair, rate in init.rates.items() if rate > 0.0)
    if dataset.adjacency is not None:
        support = [p for p in support if p in dataset.adjacency]
    trainable = dataset.trainable_cascades()
    if config.max_epochs == 0 or not support or not trainable:
        return init.copy()

    index = {pair: pos for pos, pair in enumerate(support)}
    theta = np.array([-math.log1p(-min(init.rates[p], 1.0 - 1e-12)) for p in support])
    terms_cache = {c.cascade_id: _pairwise_cascade_terms(c, index) for c in trainable}

    rng = np.random.default_rng(config.seed)
    sampler = compute_frequencies(dataset)
    fixed_negatives = {
        c.cascade_id: sample_negatives(sampler, c, config.negative_samples, rng)
        for c in trainable}
    state = AdadeltaState(theta.shape)
    previous, _ = _pairwise_value_and_grad(trainable, terms_cache, index, theta,
                                           fixed_negatives, want_grad=False)

    for _epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(trainable))
        for lo in range(0, len(trainable), config.batch_size):
            batch = [trainable[i] for i in order[lo:lo + config.batch_size]]
            negatives = {
                c.cascade_id: sample_negatives(sampler, c, config.negative_samples, rng)
                for c in batch}
            obj_before, grad = _pairwise_value_and_grad(
                batch, terms_cache, index, theta, negatives)
            delta = adadelta_step(grad, state, config.rho, config.epsilon)

            def objective_at(candidate: list[np.ndarray]) -> float:
                value, _ = _pairwise_value_and_grad(
                    batch, terms_cache, index, candidate[0], negatives,
                    want_grad=False)
                return value

            accepted, _outcome = backtrack_projected_step(
                (theta,), (delta,), (grad,), objective_at, obj_before,
                config.sigma, config.beta, config.max_backtracks)
            if accepted is not None:
                theta = accepted[0]

        epoch_objective, _ = _pairwise_value_and_grad(
            trainable, terms_cache, index, theta, fixed_negatives, want_grad=False)
        if abs(epoch_objective - previous) / max(abs(previous), 1e-12) < config.convergence_tol:
            break
        previous = epoch_objective

    return PairwiseRates({pair: float(-math.expm1(-theta[pos]))
                          for pair, pos in index.items()})


class PairwiseRateModel:
    """Rate lookup over a sparse pair map, for the shared evaluation tasks."""

    def __init__(self, rates: PairwiseRates):
        self.rates = rates
        self._by_src: dict[int, dict[int, float]] = {}
        for (src, dst), rate in rates.rates.items():
            self._by_src.setdefault(src, {})[dst] = rate

    def rate(self, j: int, i: int, k: int) -> float:
        return self.rates.get(j, i)

    def rate_matrix(self, sources: np.ndarray, targets: np.ndarray,
                    k: int) -> np.ndarray:
        sources = np.asarray(sources, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.int64)
        out = np.zeros((sources.size, targets.size))
        column = {int(t): pos for pos, t in enumerate(targets)}
        for row, src in enumerate(sources):
            entries = self._by_src.get(int(src))
            if not entries:
                continue
            for dst, rate in entries.items():
                pos = column.get(dst)
                if pos is not None:
                    out[row, pos] = rate
        return out
