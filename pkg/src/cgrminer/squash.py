"""Squash-unit extraction and squashing.

A strategy with granularity ``level`` and ``offset`` skips the first
``offset`` commits of a straight sequence and cuts the rest into
consecutive, non-overlapping windows of exactly ``level`` commits. A
trailing remainder shorter than ``level`` is dropped.

Squashing never rewrites history: a squashed unit is represented by the
snapshot before its first commit and the snapshot after its last one.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import SnapshotUnavailable
from .history import CommitGraph, CommitId, StraightSequence, extract_straight_sequences


@dataclass(frozen=True, order=True)
class Strategy:
    level: int
    offset: int = 0

    def __post_init__(self):
        if self.level < 1:
            raise ValueError(f"granularity level must be >= 1, got {self.level}")
        if not 0 <= self.offset <= self.level - 1:
            raise ValueError(f"offset must lie in [0, {self.level - 1}], got {self.offset}")


@dataclass(frozen=True)
class SquashUnit:
    commits: tuple[CommitId, ...]
    strategy: Strategy
    sequence_id: CommitId

    def __post_init__(self):
        object.__setattr__(self, "commits", tuple(self.commits))
        if len(self.commits) != self.strategy.level:
            raise ValueError(
                f"unit has {len(self.commits)} commits but level is {self.strategy.level}")

    @property
    def level(self) -> int:
        return self.strategy.level

    @property
    def first(self) -> CommitId:
        return self.commits[0]

    @property
    def last(self) -> CommitId:
        return self.commits[-1]

    def key(self) -> tuple:
        return (self.sequence_id, self.first, self.level)


@dataclass(frozen=True)
class CoarseCommit:
    unit: SquashUnit
    # None stands for the empty snapshot (unit starts at a root commit)
    before_snapshot_ref: CommitId | None
    after_snapshot_ref: CommitId


def extract_units(sequence: StraightSequence, strategy: Strategy) -> list[SquashUnit]:
    commits = sequence.commits
    level, offset = strategy.level, strategy.offset
    return [
        SquashUnit(commits[start:start + level], strategy, sequence.id)
        for start in range(offset, len(commits) - level + 1, level)
    ]


def units_at_level(graph: CommitGraph, level: int,
                   sequences: list[StraightSequence] | None = None) -> list[SquashUnit]:
    """All squash units at ``level``, pooled over every offset and sequence."""
    if level < 1:
        raise ValueError(f"granularity level must be >= 1, got {level}")
    if sequences is None:
        sequences = extract_straight_sequences(graph)
    units: dict[tuple, SquashUnit] = {}
    for seq in sequences:
        for offset in range(level):
            for unit in extract_units(seq, Strategy(level, offset)):
                units.setdefault(unit.key(), unit)
    return [units[k] for k in sorted(units)]


def squash(unit: SquashUnit, graph: CommitGraph) -> CoarseCommit:
    for cid in unit.commits:
        if cid not in graph:
            raise SnapshotUnavailable(cid, "commit not in graph")
    return CoarseCommit(unit, graph.first_parent(unit.first), unit.last)
