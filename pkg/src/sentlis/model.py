"""Closed-form model mathematics: pairwise transmission rates, the decaying
hazard, survivor terms, per-event and per-cascade log-likelihoods, the full
objective, and analytic gradients.

The transmission rate between an influencer j and a target i under sentiment
class k is ``1 - exp(-<I_j[k], S_i[k]>)``, always in [0, 1) for non-negative
parameters.  The hazard decays as ``phi / (t - t_j + 1)`` and the matching
log-survivor is ``-phi * log(t - t_j + 1)``.  Every operation here is pure:
cascades can be evaluated in parallel against a shared read-only
ParameterStore.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import CascadeRecord, ContractViolation, Dataset, ParameterStore

# Floor applied to a hazard sum before taking its logarithm, so the objective
# stays finite when every incoming rate is zero (e.g. all-zero parameters).
HAZARD_FLOOR = 1e-12

# Largest float64 strictly below 1; keeps rates inside [0, 1) even when the
# inner product is large enough that 1 - exp(-x) rounds to 1.
_RATE_CEIL = float(np.nextafter(1.0, 0.0))

Adjacency = frozenset[tuple[int, int]] | None


def transmission_rate(influence_row: np.ndarray, susceptibility_row: np.ndarray,
                      sentiment: int) -> float:
    """Rate ``1 - exp(-inner)`` with inner = I_j[k] . S_i[k], k = sentiment."""
    influence_row = np.asarray(influence_row, dtype=np.float64)
    susceptibility_row = np.asarray(susceptibility_row, dtype=np.float64)
    if influence_row.shape != susceptibility_row.shape or influence_row.ndim != 2:
        raise ContractViolation(
            f"matrix shapes differ: {influence_row.shape} vs {susceptibility_row.shape}")
    if not 0 <= sentiment < influence_row.shape[0]:
        raise ContractViolation(f"sentiment {sentiment} outside [0, {influence_row.shape[0]})")
    inner = float(influence_row[sentiment] @ susceptibility_row[sentiment])
    return min(-math.expm1(-inner), _RATE_CEIL)


def hazard(phi: float, t: float, t_j: float) -> float:
    """Instantaneous infection rate at ``t`` from an event at ``t_j``.

    Zero before the influencer is infected; callers substitute zero as well
    when an adjacency mask excludes the pair.
    """
    if t < t_j:
        return 0.0
    return phi / (t - t_j + 1.0)


def log_survivor(phi: float, t: float, t_j: float) -> float:
    """Log-probability of surviving past ``t`` under one influencer."""
    if t < t_j:
        raise ContractViolation(f"t={t} earlier than influencer time t_j={t_j}")
    return -phi * math.log(t - t_j + 1.0)


def _phi_vector(params: ParameterStore, sources: np.ndarray, target: int,
                k: int) -> np.ndarray:
    inner = params.influence[sources, k, :] @ params.susceptibility[target, k, :]
    return -np.expm1(-inner)


def event_likelihood(cascade: CascadeRecord, i: int, params: ParameterStore,
                     adjacency: Adjacency = None) -> float:
    """Likelihood of event ``i`` (0-based index into ``cascade.events``)
    given all strictly earlier events: summed hazards times the product of
    all survivor terms.  The hazard sum is floored at HAZARD_FLOOR.
    """
    n_earlier = cascade.earlier_count(i)
    if n_earlier == 0:
        raise ContractViolation(f"event {i} has no strictly earlier event")
    target = int(cascade.users[i])
    t_i = float(cascade.times[i])
    sources = cascade.users[:n_earlier]
    t_src = cascade.times[:n_earlier]
    if adjacency is not None:
        keep = np.fromiter(((int(j), target) in adjacency for j in sources),
                           dtype=bool, count=sources.size)
        sources = sources[keep]
        t_src = t_src[keep]
    if sources.size == 0:
        return HAZARD_FLOOR
    phi = _phi_vector(params, sources, target, cascade.sentiment)
    delta = t_i - t_src + 1.0
    hazard_sum = max(float(np.sum(phi / delta)), HAZARD_FLOOR)
    log_surv = -float(np.sum(phi * np.log(delta)))
    return hazard_sum * math.exp(log_surv)


@dataclass
class ObjectiveValue:
    """Negative log-likelihood plus its per-cascade contributions."""

    total: float
    contributions: list[float]


def cascade_log_likelihood(cascade: CascadeRecord, params: ParameterStore,
                           negatives: list[int],
                           adjacency: Adjacency = None) -> float:
    """Log-likelihood of one cascade with sampled negative users.

    Three terms: log hazard sums over events after the first, minus survivor
    penalties among infected pairs, minus survivor penalties of every
    infected user on every sampled negative evaluated at the horizon.
    """
    value, _, _ = _scan_cascade(cascade, params, negatives, adjacency,
                                want_gradients=False)
    return value


def objective(dataset: Dataset, params: ParameterStore,
              negatives_per_cascade: dict[str, list[int]]) -> ObjectiveValue:
    """Negative sum of cascade log-likelihoods over trainable cascades."""
    contributions = []
    for c in dataset.trainable_cascades():
        if c.cascade_id not in negatives_per_cascade:
            raise ContractViolation(f"no negatives supplied for cascade {c.cascade_id!r}")
        contributions.append(-cascade_log_likelihood(
            c, params, negatives_per_cascade[c.cascade_id], dataset.adjacency))
    return ObjectiveValue(total=float(sum(contributions)), contributions=contributions)


@dataclass
class CascadeGradients:
    """Sparse per-user K x D gradients of the negative log-likelihood.

    Users absent from a map have exactly zero gradient; present matrices are
    non-zero only in the cascade's sentiment row.
    """

    d_influence: dict[int, np.ndarray]
    d_susceptibility: dict[int, np.ndarray]


def gradients(cascade: CascadeRecord, params: ParameterStore,
              negatives: list[int],
              adjacency: Adjacency = None) -> CascadeGradients:
    """Analytic gradients of the negative cascade log-likelihood."""
    _, grad_i, grad_s = _scan_cascade(cascade, params, negatives, adjacency,
                                      want_gradients=True)
    return CascadeGradients(d_influence=grad_i, d_susceptibility=grad_s)


def cascade_value_and_gradients(cascade: CascadeRecord, params: ParameterStore,
                                negatives: list[int],
                                adjacency: Adjacency = None):
    """Log-likelihood and its gradients in one pass (trainer fast path)."""
    value, grad_i, grad_s = _scan_cascade(cascade, params, negatives, adjacency,
                                          want_gradients=True)
    return value, CascadeGradients(d_influence=grad_i, d_susceptibility=grad_s)


def _scan_cascade(cascade: CascadeRecord, params: ParameterStore,
                  negatives: list[int], adjacency: Adjacency,
                  want_gradients: bool):
    if not cascade.trainable:
        raise ContractViolation(f"cascade {cascade.cascade_id!r} has fewer than 2 events")
    overlap = cascade.user_set.intersection(negatives)
    if overlap:
        raise ContractViolation(
            f"negative users {sorted(overlap)} are infected in cascade {cascade.cascade_id!r}")

    k = cascade.sentiment
    users = cascade.users
    times = cascade.times
    n = users.size
    inf_k = params.influence[:, k, :]
    sus_k = params.susceptibility[:, k, :]

    value = 0.0
    # Gradients of the *log-likelihood*; negated on return.  Scratch rows are
    # D-vectors in the sentiment row; everything else is structurally zero.
    acc_i: dict[int, np.ndarray] = {}
    acc_s: dict[int, np.ndarray] = {}

    def bump(acc: dict[int, np.ndarray], user: int, vec: np.ndarray) -> None:
        row = acc.get(user)
        if row is None:
            acc[user] = vec.copy()
        else:
            row += vec

    for i in range(1, n):
        n_earlier = cascade.earlier_count(i)
        target = int(users[i])
        sources = users[:n_earlier]
        t_src = times[:n_earlier]
        if adjacency is not None and sources.size:
            keep = np.fromiter(((int(j), target) in adjacency for j in sources),
                               dtype=bool, count=sources.size)
            sources = sources[keep]
            t_src = t_src[keep]
        if sources.size == 0:
            value += math.log(HAZARD_FLOOR)
            continue
        inner = inf_k[sources] @ sus_k[target]
        phi = -np.expm1(-inner)
        delta = float(times[i]) - t_src + 1.0
        log_delta = np.log(delta)
        hazard_sum = float(np.sum(phi / delta))
        value += math.log(max(hazard_sum, HAZARD_FLOOR))
        value -= float(np.sum(phi * log_delta))
        if want_gradients:
            inv = 1.0 / hazard_sum if hazard_sum > HAZARD_FLOOR else 0.0
            # d lnL / d inner_ji, combining the hazard-log and survivor terms
            coef = (1.0 - phi) * (inv / delta - log_delta)
            bump(acc_s, target, coef @ inf_k[sources])
            outer = coef[:, None] * sus_k[target][None, :]
            for pos, j in enumerate(sources):
                bump(acc_i, int(j), outer[pos])

    if negatives:
        neg = np.asarray(negatives, dtype=np.int64)
        log_win = np.log(cascade.t_end - times + 1.0)
        for l in neg:
            sources = users
            w = log_win
            if adjacency is not None:
                keep = np.fromiter(((int(j), int(l)) in adjacency for j in sources),
                                   dtype=bool, count=sources.size)
                sources = sources[keep]
                w = log_win[keep]
            if sources.size == 0:
                continue
            inner = inf_k[sources] @ sus_k[int(l)]
            phi = -np.expm1(-inner)
            value -= float(np.sum(phi * w))
            if want_gradients:
                coef = -(1.0 - phi) * w
                bump(acc_s, int(l), coef @ inf_k[sources])
                outer = coef[:, None] * sus_k[int(l)][None, :]
                for pos, j in enumerate(sources):
                    bump(acc_i, int(j), outer[pos])

    if not want_gradients:
        return value, None, None

    K, D = params.K, params.D
    grad_i: dict[int, np.ndarray] = {}
    grad_s: dict[int, np.ndarray] = {}
    for user, row in acc_i.items():
        full = np.zeros((K, D))
        full[k] = -row
        grad_i[user] = full
    for user, row in acc_s.items():
        full = np.zeros((K, D))
        full[k] = -row
        grad_s[user] = full
    return value, grad_i, grad_s


# --- uniform rate lookup used by evaluation and simulation -------------------

class LatentRateModel:
    """Pairwise rates derived from learned influence/susceptibility matrices.

    A model trained with a single sentiment class answers every sentiment
    query from its only row.  An optional adjacency mask zeroes rates of
    unconnected pairs.
    """

    def __init__(self, params: ParameterStore, adjacency: Adjacency = None):
        self.params = params
        self.adjacency = adjacency

    def _row(self, k: int) -> int:
        if self.params.K == 1:
            return 0
        if not 0 <= k < self.params.K:
            raise ContractViolation(f"sentiment {k} outside [0, {self.params.K})")
        return k

    def rate(self, j: int, i: int, k: int) -> float:
        if self.adjacency is not None and (j, i) not in self.adjacency:
            return 0.0
        row = self._row(k)
        inner = float(self.params.influence[j, row, :]
                      @ self.params.susceptibility[i, row, :])
        return min(-math.expm1(-inner), _RATE_CEIL)

    def rate_matrix(self, sources: np.ndarray, targets: np.ndarray,
                    k: int) -> np.ndarray:
        row = self._row(k)
        sources = np.asarray(sources, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.int64)
        inner = (self.params.influence[sources, row, :]
                 @ self.params.susceptibility[targets, row, :].T)
        phi = np.minimum(-np.expm1(-inner), _RATE_CEIL)
        if self.adjacency is not None:
            mask = np.fromiter(
                ((int(s), int(t)) in self.adjacency
                 for s in sources for t in targets),
                dtype=bool, count=sources.size * targets.size,
            ).reshape(sources.size, targets.size)
            phi = np.where(mask, phi, 0.0)
        return phi
