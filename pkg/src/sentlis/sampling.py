"""Frequency-weighted negative sampling.

Users are drawn with probability proportional to ``R_u ** 0.75`` where
``R_u`` counts the training cascades in which user u got infected.  Users
never infected have weight zero and are never drawn.  Draws are with
replacement; collisions with the target cascade's infected users are
rejected and redrawn, so the realized distribution is the weight
distribution renormalized over users outside the cascade.
"""

from __future__ import annotations

import numpy as np

from .domain import CascadeRecord, ConfigurationError, Dataset

SAMPLING_POWER = 0.75


class NegativeSampler:
    def __init__(self, frequencies: np.ndarray):
        frequencies = np.asarray(frequencies, dtype=np.float64)
        if frequencies.ndim != 1:
            raise ConfigurationError("frequencies must be a 1-d array over users")
        weights = frequencies ** SAMPLING_POWER
        total = float(weights.sum())
        if total <= 0.0:
            raise ConfigurationError("all infection frequencies are zero; nothing to sample")
        self.frequencies = frequencies
        self.weights = weights
        self._cumulative = np.cumsum(weights)

    @property
    def M(self) -> int:
        return self.frequencies.size

    def probabilities(self, excluded: frozenset[int] = frozenset()) -> np.ndarray:
        """Analytic draw distribution after excluding the given users."""
        w = self.weights.copy()
        if excluded:
            w[list(excluded)] = 0.0
        total = w.sum()
        if total <= 0.0:
            raise ConfigurationError("no positive-weight users outside the exclusion set")
        return w / total

    def sample(self, excluded: frozenset[int], count: int,
               rng: np.random.Generator) -> list[int]:
        """Draw ``count`` users outside ``excluded``, with replacement."""
        if count == 0:
            return []
        candidate_weight = self.weights.sum()
        if excluded:
            candidate_weight -= self.weights[list(excluded)].sum()
        if candidate_weight <= 0.0:
            raise ConfigurationError("no positive-weight users outside the exclusion set")
        total = self._cumulative[-1]
        out: list[int] = []
        while len(out) < count:
            u = int(np.searchsorted(self._cumulative, rng.random() * total, side="right"))
            if u in excluded:
                continue
            out.append(u)
        return out


def compute_frequencies(dataset: Dataset) -> NegativeSampler:
    """Count, per user, the cascades of the dataset they appear in."""
    if not dataset.cascades:
        raise ConfigurationError("empty dataset")
    freq = np.zeros(dataset.M)
    for c in dataset.cascades:
        for u in c.user_set:
            freq[u] += 1.0
    return NegativeSampler(freq)


def sample_negatives(sampler: NegativeSampler, cascade: CascadeRecord,
                     count: int, rng: np.random.Generator) -> list[int]:
    """Negative users for one cascade: never drawn from its infected set."""
    return sampler.sample(cascade.user_set, count, rng)
