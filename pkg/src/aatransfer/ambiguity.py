"""Candidate arc sets built from a source parser's arc marginals.

For each dependent, heads are taken in decreasing marginal order until their
cumulative probability reaches ``sigma``; the source 1-best tree is always
added so that the candidate tree set is never empty. Multi-source sets are
per-dependent unions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from .algorithms import MASKED, has_spanning_tree
from .treebank import DependencyTree

DEFAULT_SIGMA = 0.95


class ArcSetError(ValueError):
    pass


@dataclass(frozen=True)
class AmbiguityConfig:
    sigma: float = DEFAULT_SIGMA
    include_one_best: bool = True

    def __post_init__(self):
        if not 0.0 < self.sigma <= 1.0:
            raise ValueError(f"sigma must lie in (0, 1], got {self.sigma}")


@dataclass(frozen=True, eq=False)
class AmbiguousArcSet:
    """Boolean ``(t+1, t+1)`` matrix of permitted ``[head, dependent]`` arcs."""

    allowed: np.ndarray

    def __post_init__(self):
        allowed = np.array(self.allowed, dtype=bool)
        if allowed.ndim != 2 or allowed.shape[0] != allowed.shape[1] or allowed.shape[0] < 2:
            raise ArcSetError(f"arc set must be (t+1, t+1), got {allowed.shape}")
        allowed[:, 0] = False
        np.fill_diagonal(allowed, False)
        allowed.flags.writeable = False
        object.__setattr__(self, "allowed", allowed)

    @property
    def length(self) -> int:
        return self.allowed.shape[0] - 1

    def heads(self, m: int) -> list[int]:
        """Permitted heads of dependent ``m`` in increasing order."""
        return [int(h) for h in np.flatnonzero(self.allowed[:, m])]

    def contains_tree(self, tree: DependencyTree) -> bool:
        return all(self.allowed[h, m] for h, m in tree.arcs())

    def has_spanning_tree(self) -> bool:
        return has_spanning_tree(self.allowed)

    def size(self) -> int:
        return int(self.allowed.sum())

    def __eq__(self, other):
        if not isinstance(other, AmbiguousArcSet):
            return NotImplemented
        return np.array_equal(self.allowed, other.allowed)

    @classmethod
    def full(cls, t: int) -> AmbiguousArcSet:
        return cls(np.ones((t + 1, t + 1), dtype=bool))

    @classmethod
    def from_tree(cls, tree: DependencyTree) -> AmbiguousArcSet:
        t = len(tree)
        allowed = np.zeros((t + 1, t + 1), dtype=bool)
        for h, m in tree.arcs():
            allowed[h, m] = True
        return cls(allowed)


def top_mass_heads(column: np.ndarray, sigma: float) -> list[int]:
    """Heads in decreasing marginal order up to and including the one that
    brings the running sum to at least ``sigma``.

    Ties go to the lower head index. Heads with zero marginal are never added.
    ``sigma=1`` keeps every head with positive mass, so rounding in the
    running sum cannot drop the smallest ones.
    """
    order = np.argsort(-column, kind="stable")
    if sigma >= 1.0:
        return [int(h) for h in order if column[h] > 0.0]
    chosen = []
    total = 0.0
    for h in order:
        if column[h] <= 0.0:
            break
        chosen.append(int(h))
        total += column[h]
        if total >= sigma:
            break
    return chosen


def build_arc_set(
    marginals: np.ndarray,
    one_best: Optional[DependencyTree],
    config: AmbiguityConfig = AmbiguityConfig(),
) -> AmbiguousArcSet:
    marginals = np.asarray(marginals, dtype=np.float64)
    t = marginals.shape[0] - 1
    allowed = np.zeros((t + 1, t + 1), dtype=bool)
    for m in range(1, t + 1):
        allowed[top_mass_heads(marginals[:, m], config.sigma), m] = True
    if config.include_one_best and one_best is not None:
        if len(one_best) != t:
            raise ArcSetError(f"1-best tree has {len(one_best)} tokens, marginals cover {t}")
        for h, m in one_best.arcs():
            allowed[h, m] = True
    arc_set = AmbiguousArcSet(allowed)
    if not arc_set.has_spanning_tree():
        raise ArcSetError("no spanning tree in arc set")
    return arc_set


def union_arc_sets(sets: Sequence[AmbiguousArcSet]) -> AmbiguousArcSet:
    if not sets:
        raise ArcSetError("cannot take the union of zero arc sets")
    shape = sets[0].allowed.shape
    for other in sets[1:]:
        if other.allowed.shape != shape:
            raise ArcSetError(f"arc set shapes differ: {shape} vs {other.allowed.shape}")
    return AmbiguousArcSet(np.logical_or.reduce([s.allowed for s in sets]))


def constrain_scores(scores: np.ndarray, arc_set: AmbiguousArcSet) -> np.ndarray:
    """Mask every arc outside ``arc_set``; permitted entries are unchanged."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != arc_set.allowed.shape:
        raise ArcSetError(f"score shape {scores.shape} does not match arc set {arc_set.allowed.shape}")
    return np.where(arc_set.allowed, scores, MASKED)


# Text format, one block per sentence separated by a blank line:
#
#   # arcsets v1                    (file header)
#   sent <TAB> <id> <TAB> <t>
#   <m> <TAB> <h1> <h2> ...          (one line per dependent, m = 1..t)

ARCSET_HEADER = "# arcsets v1"


def write_arc_sets(items: Iterable[tuple[str, AmbiguousArcSet]], sink: TextIO) -> None:
    sink.write(ARCSET_HEADER + "\n")
    for sent_id, arc_set in items:
        if "\t" in sent_id or "\n" in sent_id:
            raise ArcSetError(f"sentence id {sent_id!r} contains a tab or newline")
        sink.write(f"sent\t{sent_id}\t{arc_set.length}\n")
        for m in range(1, arc_set.length + 1):
            sink.write(f"{m}\t{' '.join(map(str, arc_set.heads(m)))}\n")
        sink.write("\n")


def read_arc_sets(source: Iterable[str]) -> list[tuple[str, AmbiguousArcSet]]:
    items = []
    lines = iter(enumerate(source, start=1))
    first = next(lines, None)
    if first is None or first[1].strip() != ARCSET_HEADER:
        raise ArcSetError("missing arc-set header line")
    for lineno, line in lines:
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if parts[0] != "sent" or len(parts) != 3:
            raise ArcSetError(f"line {lineno}: expected a 'sent' record")
        sent_id, t = parts[1], int(parts[2])
        allowed = np.zeros((t + 1, t + 1), dtype=bool)
        for m in range(1, t + 1):
            lineno, row = next(lines, (lineno, ""))
            fields = row.rstrip("\n").split("\t")
            if len(fields) != 2 or int(fields[0]) != m:
                raise ArcSetError(f"line {lineno}: expected heads of dependent {m}")
            for h in fields[1].split():
                allowed[int(h), m] = True
        items.append((sent_id, AmbiguousArcSet(allowed)))
    return items
