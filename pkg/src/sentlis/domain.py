"""Core data types shared by every other module: cascades, sentiment labels,
model parameters, dataset containers, and their on-disk formats.

Users are dense integer indices in ``[0, M)``.  A cascade is an ordered
sequence of ``(user, time)`` infection events observed up to a horizon
``t_end`` that lies strictly after the last event.  Times are stored as
64-bit floats in whatever unit the data was ingested with (the unit is part
of the model: hazards use ``t - t_j + 1``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Iterable

import numpy as np

UserIndex = int

CHECKPOINT_FORMAT = "sentlis-checkpoint"
CHECKPOINT_VERSION = 1


class ConfigurationError(ValueError):
    """A run cannot proceed as configured (bad flags, unsatisfiable setup)."""


class ContractViolation(ValueError):
    """An operation was called outside its stated preconditions."""


@dataclass(frozen=True)
class CascadeRecord:
    """One observed cascade: who got infected when, under which sentiment.

    ``events`` is sorted non-decreasing by time, each user appears at most
    once, and ``t_end`` is strictly greater than the last event time.
    Cascades with fewer than two events are legal data but carry no
    likelihood term.
    """

    cascade_id: str
    sentiment: int
    events: tuple[tuple[UserIndex, float], ...]
    t_end: float

    @property
    def size(self) -> int:
        return len(self.events)

    @property
    def trainable(self) -> bool:
        return len(self.events) >= 2

    @cached_property
    def users(self) -> np.ndarray:
        return np.array([u for u, _ in self.events], dtype=np.int64)

    @cached_property
    def times(self) -> np.ndarray:
        return np.array([t for _, t in self.events], dtype=np.float64)

    @cached_property
    def user_set(self) -> frozenset[UserIndex]:
        return frozenset(u for u, _ in self.events)

    def earlier_count(self, i: int) -> int:
        """Number of events strictly before the time of event ``i``."""
        return int(np.searchsorted(self.times, self.times[i], side="left"))


@dataclass
class Dataset:
    """A set of cascades over a user universe of size ``M`` with ``K``
    sentiment classes.

    ``adjacency``, when present, is the set of directed ``(src, dst)`` pairs
    along which influence is possible; every other ordered pair has hazard
    zero.  ``parents`` maps ``(cascade_id, user)`` to the ground-truth
    infector, used for evaluation and the pipeline's transitive deletions.
    """

    cascades: list[CascadeRecord]
    M: int
    K: int
    adjacency: frozenset[tuple[UserIndex, UserIndex]] | None = None
    parents: dict[tuple[str, UserIndex], UserIndex] | None = None

    def trainable_cascades(self) -> list[CascadeRecord]:
        return [c for c in self.cascades if c.trainable]

    def replace_cascades(self, cascades: list[CascadeRecord]) -> "Dataset":
        return Dataset(cascades=list(cascades), M=self.M, K=self.K,
                       adjacency=self.adjacency, parents=self.parents)


class ParameterStore:
    """Per-user non-negative K x D influence and susceptibility matrices.

    ``influence[v]`` is user v's K x D influence matrix, ``susceptibility[v]``
    the susceptibility matrix.  Entries stay >= 0 after every training step.
    Reads are safe to share across threads; updates are single-writer.
    """

    def __init__(self, influence: np.ndarray, susceptibility: np.ndarray):
        influence = np.asarray(influence, dtype=np.float64)
        susceptibility = np.asarray(susceptibility, dtype=np.float64)
        if influence.ndim != 3 or influence.shape != susceptibility.shape:
            raise ContractViolation(
                f"influence/susceptibility shapes differ: "
                f"{influence.shape} vs {susceptibility.shape}")
        self.influence = influence
        self.susceptibility = susceptibility

    @property
    def M(self) -> int:
        return self.influence.shape[0]

    @property
    def K(self) -> int:
        return self.influence.shape[1]

    @property
    def D(self) -> int:
        return self.influence.shape[2]

    @classmethod
    def zeros(cls, M: int, K: int, D: int) -> "ParameterStore":
        return cls(np.zeros((M, K, D)), np.zeros((M, K, D)))

    @classmethod
    def random(cls, M: int, K: int, D: int,
               rng: np.random.Generator) -> "ParameterStore":
        # Small positive entries: breaks symmetry and keeps every pairwise
        # rate strictly positive, so no log floor is active at the start.
        high = 0.1 / D
        return cls(rng.uniform(0.0, high, size=(M, K, D)),
                   rng.uniform(0.0, high, size=(M, K, D)))

    def copy(self) -> "ParameterStore":
        return ParameterStore(self.influence.copy(), self.susceptibility.copy())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParameterStore):
            return NotImplemented
        return (np.array_equal(self.influence, other.influence)
                and np.array_equal(self.susceptibility, other.susceptibility))

    def to_json_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "M": self.M, "K": self.K, "D": self.D,
            "influence": self.influence.tolist(),
            "susceptibility": self.susceptibility.tolist(),
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "ParameterStore":
        if payload.get("format") != CHECKPOINT_FORMAT:
            raise ConfigurationError("not a parameter checkpoint")
        if payload.get("version") != CHECKPOINT_VERSION:
            raise ConfigurationError(
                f"unsupported checkpoint version {payload.get('version')!r}")
        store = cls(np.array(payload["influence"], dtype=np.float64),
                    np.array(payload["susceptibility"], dtype=np.float64))
        expected = (payload["M"], payload["K"], payload["D"])
        if store.influence.shape != expected:
            raise ConfigurationError(
                f"checkpoint header {expected} does not match payload "
                f"{store.influence.shape}")
        return store

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "ParameterStore":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def validate_dataset(dataset: Dataset) -> list[str]:
    """Collect invariant violations; empty list means the dataset is valid.

    Violations are data, not errors: the function never raises and never
    mutates its argument.
    """
    violations: list[str] = []
    for c in dataset.cascades:
        where = f"cascade {c.cascade_id!r}"
        if not (0 <= c.sentiment < dataset.K):
            violations.append(f"{where}: sentiment {c.sentiment} outside [0, {dataset.K})")
        seen: set[int] = set()
        prev_t = None
        for u, t in c.events:
            if not (0 <= u < dataset.M):
                violations.append(f"{where}: user {u} outside [0, {dataset.M})")
            if u in seen:
                violations.append(f"{where}: user repeated ({u})")
            seen.add(u)
            if not (np.isfinite(t) and t >= 0):
                violations.append(f"{where}: event time {t} not a finite non-negative number")
            if prev_t is not None and t < prev_t:
                violations.append(f"{where}: events not sorted by time")
            prev_t = t
        if c.events and not c.t_end > c.events[-1][1]:
            violations.append(f"{where}: horizon not strictly after last event")
    if dataset.adjacency is not None:
        for src, dst in dataset.adjacency:
            if not (0 <= src < dataset.M and 0 <= dst < dataset.M):
                violations.append(f"adjacency pair ({src}, {dst}) outside user universe")
    if dataset.parents is not None:
        for (cid, user), parent in dataset.parents.items():
            if not (0 <= parent < dataset.M):
                violations.append(f"parent {parent} of user {user} in {cid!r} outside universe")
    return violations


# --- file formats (JSON lines, UTF-8) ---------------------------------------

def cascade_to_line(cascade: CascadeRecord) -> str:
    return json.dumps({
        "id": cascade.cascade_id,
        "sentiment": cascade.sentiment,
        "t_end": cascade.t_end,
        "events": [[u, t] for u, t in cascade.events],
    })


def cascade_from_line(line: str) -> CascadeRecord:
    obj = json.loads(line)
    return CascadeRecord(
        cascade_id=str(obj["id"]),
        sentiment=int(obj["sentiment"]),
        events=tuple((int(u), float(t)) for u, t in obj["events"]),
        t_end=float(obj["t_end"]),
    )


def write_cascades(cascades: Iterable[CascadeRecord], fh: IO[str]) -> None:
    for c in cascades:
        fh.write(cascade_to_line(c))
        fh.write("\n")


def read_cascades(fh: IO[str]) -> list[CascadeRecord]:
    return [cascade_from_line(line) for line in fh if line.strip()]


def write_cascades_file(cascades: Iterable[CascadeRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_cascades(cascades, fh)


def read_cascades_file(path: str) -> list[CascadeRecord]:
    with open(path, encoding="utf-8") as fh:
        return read_cascades(fh)


def write_parents_file(parents: dict[tuple[str, UserIndex], UserIndex], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (cid, user), parent in parents.items():
            fh.write(json.dumps({"id": cid, "user": user, "parent": parent}))
            fh.write("\n")


def read_parents_file(path: str) -> dict[tuple[str, UserIndex], UserIndex]:
    parents: dict[tuple[str, UserIndex], UserIndex] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            parents[(str(obj["id"]), int(obj["user"]))] = int(obj["parent"])
    return parents


def write_adjacency_file(adjacency: Iterable[tuple[UserIndex, UserIndex]], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for src, dst in sorted(adjacency):
            fh.write(json.dumps({"src": src, "dst": dst}))
            fh.write("\n")


def read_adjacency_file(path: str) -> frozenset[tuple[UserIndex, UserIndex]]:
    pairs: set[tuple[UserIndex, UserIndex]] = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            pairs.add((int(obj["src"]), int(obj["dst"])))
    return frozenset(pairs)


def infer_universe(cascades: list[CascadeRecord]) -> tuple[int, int]:
    """Infer (M, K) as one past the largest user index / sentiment class."""
    max_user = -1
    max_class = -1
    for c in cascades:
        max_class = max(max_class, c.sentiment)
        for u, _ in c.events:
            max_user = max(max_user, u)
    return max_user + 1, max_class + 1


def load_dataset(cascades_path: str, users: int | None = None,
                 classes: int | None = None,
                 parents_path: str | None = None,
                 adjacency_path: str | None = None) -> Dataset:
    cascades = read_cascades_file(cascades_path)
    inferred_m, inferred_k = infer_universe(cascades)
    parents = read_parents_file(parents_path) if parents_path else None
    adjacency = read_adjacency_file(adjacency_path) if adjacency_path else None
    return Dataset(cascades=cascades,
                   M=users if users else inferred_m,
                   K=classes if classes else max(inferred_k, 1),
                   adjacency=adjacency, parents=parents)
