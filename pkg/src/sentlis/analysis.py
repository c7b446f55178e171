"""Post-training exports for external plotting: per-user L1 norms of the
learned rows, and pairwise rate dumps comparing the latent model with a
pair-wise baseline.  Everything here is read-only."""

from __future__ import annotations

import csv
from typing import IO

import numpy as np

from .domain import ConfigurationError, ParameterStore
from .baselines import PairwiseRates
from .model import LatentRateModel

NORMS_HEADER = ("user", "sentiment", "influence_l1", "susceptibility_l1")
RATES_HEADER = ("src", "dst", "model_rate", "baseline_rate")


def export_norms(params: ParameterStore) -> list[tuple[int, int, float, float]]:
    """One row per (user, sentiment class) with exact L1 row norms."""
    rows = []
    inf_norms = np.abs(params.influence).sum(axis=2)
    sus_norms = np.abs(params.susceptibility).sum(axis=2)
    for user in range(params.M):
        for k in range(params.K):
            rows.append((user, k, float(inf_norms[user, k]), float(sus_norms[user, k])))
    return rows


def write_norms_csv(params: ParameterStore, fh: IO[str]) -> None:
    writer = csv.writer(fh)
    writer.writerow(NORMS_HEADER)
    writer.writerows(export_norms(params))


def sample_pairs(n_users: int, count: int, seed: int) -> list[tuple[int, int]]:
    """Uniform sample of distinct ordered pairs (no self-pairs)."""
    total = n_users * (n_users - 1)
    if count > total:
        raise ConfigurationError(f"asked for {count} pairs of {total} available")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(total, size=count, replace=False)
    pairs = []
    for flat in chosen:
        src, offset = divmod(int(flat), n_users - 1)
        dst = offset if offset < src else offset + 1
        pairs.append((src, dst))
    return pairs


def all_pairs(n_users: int) -> list[tuple[int, int]]:
    return [(j, i) for j in range(n_users) for i in range(n_users) if j != i]


def export_rates(params: ParameterStore, baseline: PairwiseRates,
                 sentiment: int,
                 pairs: list[tuple[int, int]]) -> list[tuple[int, int, float, float]]:
    """Model rate vs baseline rate for the requested ordered pairs."""
    model = LatentRateModel(params)
    return [(j, i, model.rate(j, i, sentiment), baseline.get(j, i))
            for j, i in pairs]


def write_rates_csv(params: ParameterStore, baseline: PairwiseRates,
                    sentiment: int, pairs: list[tuple[int, int]],
                    fh: IO[str]) -> None:
    writer = csv.writer(fh)
    writer.writerow(RATES_HEADER)
    writer.writerows(export_rates(params, baseline, sentiment, pairs))
