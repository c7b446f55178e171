"""Raw-data preparation: emoticon-lexicon sentiment assignment and the
iterative low-activeness filter ("onion peeling").

Activeness of a user is the number of surviving records they appear in
(times infected) plus the number of surviving records naming them as the
parent (times they got retweeted).  Without parent relations the second
component is zero and the threshold effectively applies to infections
alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .domain import CascadeRecord, ConfigurationError, Dataset


@dataclass(frozen=True)
class LexiconEntry:
    token: str
    polarity: int


def load_lexicon(path: str) -> list[LexiconEntry]:
    """Token TAB polarity per line; blank lines and #-comments ignored."""
    entries: list[LexiconEntry] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ConfigurationError(f"lexicon line {lineno}: expected 'token<TAB>polarity'")
            token, polarity = parts[0], parts[1].strip()
            if token in seen:
                raise ConfigurationError(f"lexicon line {lineno}: duplicate token {token!r}")
            seen.add(token)
            entries.append(LexiconEntry(token=token, polarity=int(polarity)))
    return entries


def assign_sentiment(text: str, lexicon: list[LexiconEntry]) -> int | None:
    """Majority polarity over matched emoticon occurrences; None on a tie
    or when nothing matches."""
    counts: dict[int, int] = {}
    for entry in lexicon:
        hits = text.count(entry.token)
        if hits:
            counts[entry.polarity] = counts.get(entry.polarity, 0) + hits
    if not counts:
        return None
    best = max(counts.values())
    winners = [polarity for polarity, n in counts.items() if n == best]
    if len(winners) != 1:
        return None
    return winners[0]


def label_cascades(cascades: list[CascadeRecord], texts: dict[str, str],
                   lexicon: list[LexiconEntry]
                   ) -> tuple[list[CascadeRecord], int]:
    """Relabel cascades from their message texts; drop unlabelable ones."""
    labeled: list[CascadeRecord] = []
    dropped = 0
    for c in cascades:
        text = texts.get(c.cascade_id)
        sentiment = assign_sentiment(text, lexicon) if text is not None else None
        if sentiment is None:
            dropped += 1
            continue
        labeled.append(CascadeRecord(c.cascade_id, sentiment, c.events, c.t_end))
    return labeled, dropped


@dataclass
class Activeness:
    infected: dict[int, int] = field(default_factory=dict)   # A_in
    retweeted: dict[int, int] = field(default_factory=dict)  # A_out

    def total(self, user: int) -> int:
        return self.infected.get(user, 0) + self.retweeted.get(user, 0)


def compute_activeness(cascades: list[CascadeRecord],
                       parents: dict[tuple[str, int], int] | None) -> Activeness:
    act = Activeness()
    for c in cascades:
        for u, _ in c.events:
            act.infected[u] = act.infected.get(u, 0) + 1
            if parents is not None:
                parent = parents.get((c.cascade_id, u))
                if parent is not None:
                    act.retweeted[parent] = act.retweeted.get(parent, 0) + 1
    return act


@dataclass
class PeelSummary:
    users: int
    cascades: int
    passes: int
    dropped_users: int
    dropped_cascades: int

    def to_json_dict(self) -> dict:
        return {"users": self.users, "cascades": self.cascades,
                "passes": self.passes, "dropped_users": self.dropped_users,
                "dropped_cascades": self.dropped_cascades}


def onion_peel(dataset: Dataset, min_activeness: int = 5,
               min_cascade_size: int = 8) -> tuple[Dataset, PeelSummary]:
    """Iterate to a fixed point: drop records of users below the activeness
    threshold, transitively drop records whose parent record fell in the
    same pass, then drop cascades below the size threshold.

    Parent relations come from ``dataset.parents``; records without a known
    parent only face the activeness rule.  An empty result is legal.
    """
    cascades = list(dataset.cascades)
    parents = dataset.parents
    initial_users = {u for c in cascades for u, _ in c.events}
    initial_cascades = len(cascades)
    passes = 0

    while True:
        passes += 1
        act = compute_activeness(cascades, parents)
        weak = {u for c in cascades for u, _ in c.events
                if act.total(u) < min_activeness}

        records_removed = 0
        cascades_removed = 0
        next_cascades: list[CascadeRecord] = []
        for c in cascades:
            removed = {u for u, _ in c.events if u in weak}
            if parents is not None:
                # transitive closure within this cascade: a record whose
                # parent record was just removed goes too
                while True:
                    extra = {u for u, _ in c.events
                             if u not in removed
                             and parents.get((c.cascade_id, u)) in removed}
                    if not extra:
                        break
                    removed |= extra
            records_removed += len(removed)
            kept = tuple(e for e in c.events if e[0] not in removed)
            if len(kept) < min_cascade_size:
                cascades_removed += 1
                continue
            next_cascades.append(
                c if len(kept) == len(c.events)
                else CascadeRecord(c.cascade_id, c.sentiment, kept, c.t_end))
        if records_removed == 0 and cascades_removed == 0:
            break
        cascades = next_cascades
        if not cascades:
            break

    surviving_users = {u for c in cascades for u, _ in c.events}
    summary = PeelSummary(
        users=len(surviving_users),
        cascades=len(cascades),
        passes=passes,
        dropped_users=len(initial_users - surviving_users),
        dropped_cascades=initial_cascades - len(cascades),
    )
    return dataset.replace_cascades(cascades), summary
