"""The three prediction tasks and their metrics, plus k-fold orchestration.

Tasks:
  * infection prediction over cascade dynamics: AUC of infected-vs-immune
    scoring plus MRR of ranking the next infected user;
  * parent attribution ("who gets retweeted"): top-one accuracy and MRR of
    ranking earlier-infected users by the pairwise infection density;
  * cascade size prediction: Monte-Carlo simulation from the first seed
    events, scored by mean absolute percentage error.

All rankings are score-based, so any model exposing ``rate``/``rate_matrix``
plugs in unchanged.  Ties rank pessimistically (worst rank).
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from .domain import CascadeRecord, ConfigurationError, Dataset
from .model import HAZARD_FLOOR
from .simulate import run_scale_simulation

PCD_TIME_EPSILON = 1e-6


# --- scalar metrics -----------------------------------------------------------

def auc_score(positive_scores, negative_scores) -> float:
    """Probability a random positive outscores a random negative; ties 1/2."""
    pos = np.asarray(positive_scores, dtype=np.float64)
    neg = np.asarray(negative_scores, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ConfigurationError("AUC needs at least one positive and one negative")
    pooled = np.concatenate([pos, neg])
    n = pooled.size
    order = np.argsort(pooled, kind="mergesort")
    sorted_vals = pooled[order]
    # average ranks over runs of tied values implement the ties-count-half rule
    boundary = np.flatnonzero(np.diff(sorted_vals) != 0) + 1
    starts = np.concatenate([[0], boundary])
    ends = np.concatenate([boundary, [n]])
    ranks = np.empty(n)
    ranks[order] = np.repeat((starts + ends + 1) / 2.0, ends - starts)
    rank_sum = ranks[:pos.size].sum()
    u_stat = rank_sum - pos.size * (pos.size + 1) / 2.0
    return float(u_stat / (pos.size * neg.size))


def mean_reciprocal_rank(ranks) -> float:
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0:
        raise ConfigurationError("MRR over no ranks")
    return float((1.0 / ranks).mean())


def mape(truths, predictions) -> float:
    truths = np.asarray(truths, dtype=np.float64)
    predictions = np.asarray(predictions, dtype=np.float64)
    if truths.size == 0:
        raise ConfigurationError("MAPE over no cascades")
    return float(np.mean(np.abs(predictions - truths) / truths))


def worst_rank(scores: np.ndarray, target_position: int) -> int:
    """1-based rank of the target; tied scores count as ranked ahead."""
    return int(np.sum(scores >= scores[target_position]))


# --- shared scoring helpers -----------------------------------------------------

def log_infection_scores(model, earlier_users: np.ndarray,
                         earlier_times: np.ndarray, t: float,
                         candidates: np.ndarray, sentiment: int) -> np.ndarray:
    """Log-density of each candidate getting infected at ``t`` given truth.

    Log scale keeps long histories from underflowing; every metric is
    rank-based, so the monotone transform is harmless.
    """
    rates = model.rate_matrix(earlier_users, candidates, sentiment)
    delta = t - earlier_times + 1.0
    hazard_sum = (rates / delta[:, None]).sum(axis=0)
    log_survivor = -(rates * np.log(delta)[:, None]).sum(axis=0)
    return np.log(np.maximum(hazard_sum, HAZARD_FLOOR)) + log_survivor


def _scoreable_events(cascade: CascadeRecord):
    """Event indices with at least one strictly earlier event."""
    return [i for i in range(1, cascade.size) if cascade.earlier_count(i) > 0]


# --- task: infection prediction (classification + ranking) -----------------------

@dataclass
class PcdResult:
    auc: float
    mrr: float
    per_cascade_auc: dict[str, float] = field(default_factory=dict)
    skipped_cascades: int = 0
    ranked_events: int = 0


def pcd_auc(cascades: list[CascadeRecord], model, n_users: int,
            epsilon: float = PCD_TIME_EPSILON,
            pooled: bool = False) -> tuple[float, dict[str, float], int]:
    """AUC of separating finally-infected from immune users.

    Positives score at their true infection times given earlier truth;
    immune users score as if infected right after the last event.  By
    default the per-cascade AUCs are averaged; ``pooled`` computes one AUC
    over all cascades' scores.
    """
    per_cascade: dict[str, float] = {}
    pooled_pos: list[float] = []
    pooled_neg: list[float] = []
    skipped = 0
    for c in cascades:
        uninfected = np.setdiff1d(np.arange(n_users), c.users)
        events = _scoreable_events(c)
        if uninfected.size == 0 or not events:
            skipped += 1
            continue
        pos_scores = []
        for i in events:
            n_earlier = c.earlier_count(i)
            score = log_infection_scores(
                model, c.users[:n_earlier], c.times[:n_earlier],
                float(c.times[i]), c.users[i:i + 1], c.sentiment)
            pos_scores.append(float(score[0]))
        neg_scores = log_infection_scores(
            model, c.users, c.times, float(c.times[-1]) + epsilon,
            uninfected, c.sentiment)
        per_cascade[c.cascade_id] = auc_score(pos_scores, neg_scores)
        pooled_pos.extend(pos_scores)
        pooled_neg.extend(neg_scores.tolist())
    if pooled:
        value = auc_score(pooled_pos, pooled_neg) if pooled_pos else float("nan")
    else:
        value = float(np.mean(list(per_cascade.values()))) if per_cascade else float("nan")
    return value, per_cascade, skipped


def pcd_mrr(cascades: list[CascadeRecord], model, n_users: int) -> tuple[float, int]:
    """MRR of ranking the actually infected user among all not-yet-infected."""
    reciprocal: list[float] = []
    universe = np.arange(n_users)
    for c in cascades:
        for i in _scoreable_events(c):
            n_earlier = c.earlier_count(i)
            candidates = np.setdiff1d(universe, c.users[:n_earlier])
            scores = log_infection_scores(
                model, c.users[:n_earlier], c.times[:n_earlier],
                float(c.times[i]), candidates, c.sentiment)
            target = int(np.searchsorted(candidates, c.users[i]))
            reciprocal.append(1.0 / worst_rank(scores, target))
    if not reciprocal:
        return float("nan"), 0
    return float(np.mean(reciprocal)), len(reciprocal)


def pcd(cascades: list[CascadeRecord], model, n_users: int,
        epsilon: float = PCD_TIME_EPSILON, pooled: bool = False) -> PcdResult:
    auc, per_cascade, skipped = pcd_auc(cascades, model, n_users, epsilon, pooled)
    mrr, n_events = pcd_mrr(cascades, model, n_users)
    return PcdResult(auc=auc, mrr=mrr, per_cascade_auc=per_cascade,
                     skipped_cascades=skipped, ranked_events=n_events)


# --- task: parent attribution ------------------------------------------------------

@dataclass
class WbrResult:
    accuracy: float
    mrr: float
    scored_events: int = 0
    excluded_missing_parent: int = 0
    excluded_invalid_parent: int = 0


def wbr(cascades: list[CascadeRecord],
        parents: dict[tuple[str, int], int], model) -> WbrResult:
    """Rank earlier-infected users by pairwise infection density at the
    event time; the true parent should rank first.

    Events without ground truth, or whose recorded parent was not infected
    strictly earlier in the same cascade, are excluded and counted.
    """
    hits = 0
    ranks: list[int] = []
    missing = invalid = 0
    for c in cascades:
        for i in _scoreable_events(c):
            parent = parents.get((c.cascade_id, int(c.users[i])))
            if parent is None:
                missing += 1
                continue
            n_earlier = c.earlier_count(i)
            earlier_users = c.users[:n_earlier]
            position = np.flatnonzero(earlier_users == parent)
            if position.size == 0:
                invalid += 1
                continue
            t_i = float(c.times[i])
            rates = model.rate_matrix(earlier_users, c.users[i:i + 1],
                                      c.sentiment)[:, 0]
            delta = t_i - c.times[:n_earlier] + 1.0
            density = rates / delta * delta ** (-rates)
            rank = worst_rank(density, int(position[0]))
            ranks.append(rank)
            hits += 1 if rank == 1 else 0
    if not ranks:
        return WbrResult(float("nan"), float("nan"), 0, missing, invalid)
    return WbrResult(accuracy=hits / len(ranks),
                     mrr=mean_reciprocal_rank(ranks),
                     scored_events=len(ranks),
                     excluded_missing_parent=missing,
                     excluded_invalid_parent=invalid)


# --- task: cascade size prediction ----------------------------------------------

@dataclass
class CspResult:
    mape: float
    per_cascade: dict[str, tuple[int, float]] = field(default_factory=dict)
    excluded_cascades: int = 0


def simulation_rng(seed: int, cascade_id: str, sim_index: int) -> np.random.Generator:
    """Independent stream per (run seed, cascade, simulation index)."""
    return np.random.default_rng((seed, zlib.crc32(cascade_id.encode("utf-8")), sim_index))


def csp(cascades: list[CascadeRecord], model, n_users: int,
        seed_count: int = 10, n_sims: int = 100, n_scales: int = 50,
        seed: int = 0) -> CspResult:
    """Monte-Carlo size prediction from the first ``seed_count`` events.

    Cascades not strictly larger than the seed prefix (or with no time span
    left to simulate) are excluded and counted.
    """
    truths: list[float] = []
    predictions: list[float] = []
    per_cascade: dict[str, tuple[int, float]] = {}
    excluded = 0
    for c in cascades:
        if c.size <= seed_count or not c.times[-1] > c.times[seed_count - 1]:
            excluded += 1
            continue
        seeds = [(int(u), float(t)) for u, t in c.events[:seed_count]]
        t_start = float(c.times[seed_count - 1])
        t_end = float(c.times[-1])
        sizes = []
        for s in range(n_sims):
            rng = simulation_rng(seed, c.cascade_id, s)
            new = run_scale_simulation(model, c.sentiment, seeds, n_users,
                                       t_start, t_end, n_scales, rng)
            sizes.append(seed_count + len(new))
        predicted = float(np.mean(sizes))
        truths.append(float(c.size))
        predictions.append(predicted)
        per_cascade[c.cascade_id] = (c.size, predicted)
    if not truths:
        return CspResult(float("nan"), per_cascade, excluded)
    return CspResult(mape=mape(truths, predictions), per_cascade=per_cascade,
                     excluded_cascades=excluded)


# --- k-fold orchestration ---------------------------------------------------------

def kfold_split(dataset: Dataset, k: int = 10, seed: int = 0
                ) -> list[tuple[Dataset, Dataset]]:
    """Deterministic shuffled partition into k near-equal test groups."""
    n = len(dataset.cascades)
    if n < k:
        raise ConfigurationError(f"cannot split {n} cascades into {k} folds")
    if k < 2:
        raise ConfigurationError("need at least 2 folds")
    order = np.random.default_rng(seed).permutation(n)
    groups = np.array_split(order, k)
    folds = []
    for g in groups:
        test_ids = set(int(x) for x in g)
        train = [dataset.cascades[i] for i in range(n) if i not in test_ids]
        test = [dataset.cascades[i] for i in sorted(test_ids)]
        folds.append((dataset.replace_cascades(train), dataset.replace_cascades(test)))
    return folds


@dataclass
class MetricSummary:
    per_fold: list[float]
    mean: float
    sd: float

    @classmethod
    def from_values(cls, values: list[float]) -> "MetricSummary":
        arr = np.asarray(values, dtype=np.float64)
        return cls(per_fold=list(map(float, arr)),
                   mean=float(arr.mean()), sd=float(arr.std()))


@dataclass
class EvalReport:
    task: str
    model: str
    metrics: dict[str, MetricSummary]
    notes: dict[str, float] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "task": self.task,
            "model": self.model,
            "metrics": {
                name: {"per_fold": m.per_fold, "mean": m.mean, "sd": m.sd}
                for name, m in self.metrics.items()},
            "notes": self.notes,
        }


def format_report_table(reports: list[EvalReport]) -> str:
    """Aligned model-by-metric table with mean +/- SD cells."""
    metric_names: list[str] = []
    for r in reports:
        for name in r.metrics:
            if name not in metric_names:
                metric_names.append(name)
    header = ["model"] + metric_names
    rows = [header]
    for r in reports:
        row = [r.model]
        for name in metric_names:
            m = r.metrics.get(name)
            row.append(f"{m.mean:.4f} +/- {m.sd:.4f}" if m else "-")
        rows.append(row)
    widths = [max(len(row[c]) for row in rows) for c in range(len(header))]
    lines = []
    for idx, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[c]) for c, cell in enumerate(row)))
        if idx == 0:
            lines.append("  ".join("-" * widths[c] for c in range(len(header))))
    return "\n".join(lines)
