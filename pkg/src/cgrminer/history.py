"""Commit graph and straight-sequence extraction."""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Iterable, Mapping

from .errors import CycleDetected, DuplicateCommit, GraphError, UnresolvedParent

CommitId = str


@dataclass(frozen=True)
class Commit:
    id: CommitId
    parents: tuple[CommitId, ...] = ()
    message: str = ""
    # opaque handle understood by the repository that produced the commit
    snapshot_ref: Any = field(default=None, compare=False)

    def __post_init__(self):
        if not self.id:
            raise GraphError("commit id must be non-empty")
        object.__setattr__(self, "parents", tuple(self.parents))
        if len(set(self.parents)) != len(self.parents):
            raise GraphError(f"commit {self.id!r} lists a parent twice")

    @property
    def is_merge(self) -> bool:
        return len(self.parents) > 1


@dataclass(frozen=True)
class StraightSequence:
    commits: tuple[CommitId, ...]

    @property
    def id(self) -> CommitId:
        return self.commits[0]

    def __len__(self) -> int:
        return len(self.commits)


class CommitGraph:
    """Immutable DAG of commits with precomputed child lists.

    Use :func:`build_graph` to construct one; it validates parent references
    and rejects cycles.
    """

    def __init__(self, commits: Mapping[CommitId, Commit], children: Mapping[CommitId, tuple]):
        self._commits = MappingProxyType(dict(commits))
        self._children = MappingProxyType(dict(children))
        self.roots = frozenset(c.id for c in self._commits.values() if not c.parents)

    @property
    def commits(self) -> Mapping[CommitId, Commit]:
        return self._commits

    def __len__(self) -> int:
        return len(self._commits)

    def __contains__(self, commit_id) -> bool:
        return commit_id in self._commits

    def __iter__(self):
        return iter(self._commits)

    def __getitem__(self, commit_id: CommitId) -> Commit:
        return self._commits[commit_id]

    def parents(self, commit_id: CommitId) -> tuple[CommitId, ...]:
        return self._commits[commit_id].parents

    def children(self, commit_id: CommitId) -> tuple[CommitId, ...]:
        return self._children[commit_id]

    def is_merge(self, commit_id: CommitId) -> bool:
        return len(self._commits[commit_id].parents) > 1

    def is_branch_source(self, commit_id: CommitId) -> bool:
        return len(self._children[commit_id]) > 1

    def first_parent(self, commit_id: CommitId) -> CommitId | None:
        parents = self._commits[commit_id].parents
        return parents[0] if parents else None

    def __repr__(self) -> str:
        return f"CommitGraph({len(self)} commits, roots={sorted(self.roots)})"


def build_graph(commits: Iterable[Commit]) -> CommitGraph:
    by_id: dict[CommitId, Commit] = {}
    for commit in commits:
        if commit.id in by_id:
            raise DuplicateCommit(commit.id)
        by_id[commit.id] = commit

    children: dict[CommitId, list[CommitId]] = {cid: [] for cid in by_id}
    for commit in by_id.values():
        for parent in commit.parents:
            if parent not in by_id:
                raise UnresolvedParent(commit.id, parent)
            children[parent].append(commit.id)

    # Kahn's algorithm; anything left unvisited sits on a cycle
    indegree = {cid: len(c.parents) for cid, c in by_id.items()}
    ready = [cid for cid, deg in indegree.items() if deg == 0]
    seen = 0
    while ready:
        cid = ready.pop()
        seen += 1
        for child in children[cid]:
            indegree[child] -= 1
            if indegree[child] == 0:
                ready.append(child)
    if seen != len(by_id):
        raise CycleDetected(cid for cid, deg in indegree.items() if deg > 0)

    return CommitGraph(by_id, {cid: tuple(sorted(kids)) for cid, kids in children.items()})


def _qualifies(graph: CommitGraph, commit_id: CommitId) -> bool:
    return not graph.is_merge(commit_id) and not graph.is_branch_source(commit_id)


def extract_straight_sequences(graph: CommitGraph) -> list[StraightSequence]:
    """Return the maximal runs of commits that are neither merges nor branch sources.

    An excluded commit ends a run on both sides; runs are never bridged over
    it. Root commits may head a run. The result is sorted by first commit id.
    """
    sequences = []
    for cid in graph:
        if not _qualifies(graph, cid):
            continue
        parent = graph.first_parent(cid)
        if parent is not None and _qualifies(graph, parent):
            continue  # not the head of its run
        run = [cid]
        while True:
            kids = graph.children(run[-1])
            if len(kids) != 1 or not _qualifies(graph, kids[0]):
                break
            run.append(kids[0])
        sequences.append(StraightSequence(tuple(run)))
    sequences.sort(key=lambda s: s.id)
    return sequences
