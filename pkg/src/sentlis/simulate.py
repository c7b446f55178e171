"""Discrete-scale cascade simulation driven by pairwise transmission rates.

A prediction window is split into equal time scales.  Within scale
``(tau_prev, tau]`` an infective user u attempts every uninfected user v
independently with the survivor-ratio probability

    1 - ((tau_prev - t_u + 1) / (tau - t_u + 1)) ** rate(u, v)

which is exactly the conditional probability of v falling in the scale
given survival past its start.  Users infected in a scale join at the scale
midpoint and become infective from the next scale on.  Size prediction and
synthetic data generation share this kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SimulatedInfection:
    user: int
    time: float
    parent: int


def scale_infection_probability(rate: float, t_u: float, tau_prev: float,
                                tau: float) -> float:
    """Closed-form per-scale infection probability for a single influencer."""
    return 1.0 - ((tau_prev - t_u + 1.0) / (tau - t_u + 1.0)) ** rate


def run_scale_simulation(rate_model, sentiment: int,
                         seeds: list[tuple[int, float]], n_users: int,
                         t_start: float, t_end: float, n_scales: int,
                         rng: np.random.Generator) -> list[SimulatedInfection]:
    """Simulate infections over ``(t_start, t_end]`` from the seed events.

    ``rate_model`` must provide ``rate_matrix(sources, targets, k)``.  Every
    user outside the current infected set is a candidate at every scale.
    When several influencers succeed on the same user in one scale, one of
    them is drawn uniformly as the parent.  Returns only the newly infected.
    """
    boundaries = np.linspace(t_start, t_end, n_scales + 1)
    infected_users = [int(u) for u, _ in seeds]
    infected_times = [float(t) for _, t in seeds]
    infected_set = set(infected_users)
    new_infections: list[SimulatedInfection] = []

    for s in range(1, n_scales + 1):
        tau_prev, tau = float(boundaries[s - 1]), float(boundaries[s])
        candidates = np.array([v for v in range(n_users) if v not in infected_set],
                              dtype=np.int64)
        if candidates.size == 0:
            break
        sources = np.asarray(infected_users, dtype=np.int64)
        t_src = np.asarray(infected_times, dtype=np.float64)
        ratio = (tau_prev - t_src + 1.0) / (tau - t_src + 1.0)
        rates = rate_model.rate_matrix(sources, candidates, sentiment)
        prob = 1.0 - ratio[:, None] ** rates
        success = rng.random(prob.shape) < prob
        midpoint = 0.5 * (tau_prev + tau)
        scale_new: list[SimulatedInfection] = []
        for col in np.flatnonzero(success.any(axis=0)):
            attackers = np.flatnonzero(success[:, col])
            pick = attackers[0] if attackers.size == 1 else attackers[int(rng.integers(attackers.size))]
            scale_new.append(SimulatedInfection(
                user=int(candidates[col]), time=midpoint,
                parent=int(sources[pick])))
        for inf in scale_new:
            infected_users.append(inf.user)
            infected_times.append(inf.time)
            infected_set.add(inf.user)
        new_infections.extend(scale_new)

    return new_infections
