"""Coarse-grained refactoring analysis.

For a squash unit, the coarse-grained refactorings are the instances detected
on the squashed commit whose type is absent from every fine-grained detection
of the unit's own commits. A unit is *effective* when it has at least one.
Per level, the frequency is the share of effective units; per type, the ratio
is the number of coarse-grained instances of that type per effective unit,
pooled over the analysed levels.
"""

from __future__ import annotations

import logging
import posixpath
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping

from .detector import (
    DEFAULT_THRESHOLD,
    RefactoringInstance,
    RefactoringType,
    TypeName,
    detect,
    sorted_instances,
)
from ._memo import OnceCache
from .errors import CgrMinerError, MissingDetection, NoUnits
from .history import CommitId, extract_straight_sequences
from .repository import Repository
from .squash import SquashUnit, units_at_level

log = logging.getLogger(__name__)

GENERATION = "Generation"
COMBINATION = "Combination"
UNCLASSIFIED = "Unclassified"
CLASSIFICATIONS = (GENERATION, COMBINATION, UNCLASSIFIED)
CLASSIFICATION_METHOD = "heuristic:file-overlap"

DEFAULT_LEVELS = (2, 3, 4)

Detections = Mapping[CommitId, Iterable[RefactoringInstance]]
Pair = tuple  # (before commit or None, after commit)


class AnalysisError(CgrMinerError):
    """A module error annotated with the unit or commit pair being processed."""

    def __init__(self, context: str, cause: Exception):
        super().__init__(f"{context}: {cause}")
        self.context = context
        self.cause = cause


# -- set definitions -------------------------------------------------------


def ref_types(unit: SquashUnit, fine: Detections) -> frozenset[TypeName]:
    types = set()
    for cid in unit.commits:
        if cid not in fine:
            raise MissingDetection(cid)
        types.update(r.type for r in fine[cid])
    return frozenset(types)


def compute_cgr(unit: SquashUnit, coarse: Iterable[RefactoringInstance],
                fine: Detections) -> frozenset[RefactoringInstance]:
    fine_types = ref_types(unit, fine)
    return frozenset(r for r in coarse if r.type not in fine_types)


def is_effective(unit: SquashUnit, coarse: Iterable[RefactoringInstance], fine: Detections) -> bool:
    return bool(compute_cgr(unit, coarse, fine))


def _footprint(inst: RefactoringInstance) -> tuple[set[str], set[str]]:
    files, dirs = set(), set()
    for loc in inst.before_locations + inst.after_locations:
        (dirs if loc.entity_kind == "package" else files).add(loc.file_path)
    return files, dirs


def _overlaps(a: RefactoringInstance, b: RefactoringInstance) -> bool:
    a_files, a_dirs = _footprint(a)
    b_files, b_dirs = _footprint(b)
    if a_files & b_files or a_dirs & b_dirs:
        return True
    # package locations point at the package directory
    return bool({posixpath.dirname(f) for f in a_files} & b_dirs
                or {posixpath.dirname(f) for f in b_files} & a_dirs)


def classify_cgr(instance: RefactoringInstance, unit: SquashUnit, fine: Detections) -> str:
    """Label a coarse-grained refactoring as Combination or Generation.

    Combination when some fine-grained detection inside the unit touches a
    file (or package directory) the coarse instance touches; Generation
    otherwise. This is a mechanical stand-in for manual inspection.
    """
    for cid in unit.commits:
        if cid not in fine:
            raise MissingDetection(cid)
        if any(_overlaps(instance, f) for f in fine[cid]):
            return COMBINATION
    return GENERATION


# -- report model ----------------------------------------------------------


@dataclass(frozen=True)
class CgrRecord:
    instance: RefactoringInstance
    unit: SquashUnit
    level: int
    classification: str = UNCLASSIFIED


@dataclass(frozen=True)
class LevelSummary:
    level: int
    units: int
    effective: int

    @property
    def frequency(self) -> float | None:
        """Share of effective units, or ``None`` when the level has no units."""
        return self.effective / self.units if self.units else None

    @property
    def exact_frequency(self) -> Fraction:
        if not self.units:
            raise NoUnits(self.level)
        return Fraction(self.effective, self.units)


@dataclass(frozen=True)
class TypeRatio:
    type: TypeName
    cgr_count: int
    effective_count: int

    @property
    def ratio(self) -> float | None:
        return self.cgr_count / self.effective_count if self.effective_count else None


@dataclass(frozen=True)
class UnitSummary:
    level: int
    offset: int
    sequence_id: CommitId
    commits: tuple[CommitId, ...]
    fine_instances: int
    coarse_instances: int
    cgrs: int

    @property
    def effective(self) -> bool:
        return self.cgrs > 0


@dataclass(frozen=True)
class AnalysisConfig:
    threshold: float = DEFAULT_THRESHOLD
    levels: tuple[int, ...] = DEFAULT_LEVELS
    extension: str = ".java"
    classification: str = CLASSIFICATION_METHOD


@dataclass(frozen=True)
class AnalysisReport:
    config: AnalysisConfig = field(default_factory=AnalysisConfig)
    levels: tuple[LevelSummary, ...] = ()
    ratios: tuple[TypeRatio, ...] = ()
    units: tuple[UnitSummary, ...] = ()
    cgrs: tuple[CgrRecord, ...] = ()

    def level(self, level: int) -> LevelSummary:
        for summary in self.levels:
            if summary.level == level:
                return summary
        raise KeyError(level)

    def ratio_of(self, type_name: TypeName) -> TypeRatio:
        for r in self.ratios:
            if r.type == type_name:
                return r
        raise KeyError(type_name)

    def sequence_frequencies(self) -> dict[int, list[float]]:
        """Per level, the frequency of each straight sequence that has units there."""
        tally: dict[tuple[int, str], list[int]] = {}
        for u in self.units:
            t = tally.setdefault((u.level, u.sequence_id), [0, 0])
            t[0] += 1
            t[1] += u.effective
        out: dict[int, list[float]] = {s.level: [] for s in self.levels}
        for (level, _), (n, eff) in sorted(tally.items()):
            out.setdefault(level, []).append(eff / n)
        return out


# -- pipeline --------------------------------------------------------------


PairDetector = Callable[[CommitId | None, CommitId], Iterable[RefactoringInstance]]


class CgrAnalyzer:
    """Runs fine- and coarse-grained detection over a repository, memoised per snapshot pair.

    ``pair_detector`` may replace the built-in detector, e.g. with results
    ingested from an external tool; it receives (before commit or None,
    after commit).
    """

    def __init__(self, repo: Repository, threshold: float = DEFAULT_THRESHOLD,
                 jobs: int = 1, pair_detector: PairDetector | None = None):
        if not 0 < threshold <= 1:
            raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
        if jobs < 1:
            raise ValueError(f"jobs must be positive, got {jobs}")
        self.repo = repo
        self.graph = repo.graph
        self.threshold = threshold
        self.jobs = jobs
        self._pair_detector = pair_detector or self._builtin_detector
        self._cache = OnceCache()
        self._sequences = extract_straight_sequences(self.graph)
        self._units: dict[int, list[SquashUnit]] = {}

    def _builtin_detector(self, before: CommitId | None, after: CommitId):
        return detect(self.repo.read_snapshot(before), self.repo.read_snapshot(after), self.threshold)

    def detect_pair(self, before: CommitId | None, after: CommitId) -> frozenset[RefactoringInstance]:
        def compute():
            try:
                return frozenset(self._pair_detector(before, after))
            except CgrMinerError as exc:
                raise AnalysisError(f"detecting {before or '<empty>'}..{after}", exc) from exc
        return self._cache.get((before, after), compute)

    def fine(self, commit_id: CommitId) -> frozenset[RefactoringInstance]:
        return self.detect_pair(self.graph.first_parent(commit_id), commit_id)

    def coarse(self, unit: SquashUnit) -> frozenset[RefactoringInstance]:
        return self.detect_pair(self.graph.first_parent(unit.first), unit.last)

    def units(self, level: int) -> list[SquashUnit]:
        if level not in self._units:
            self._units[level] = units_at_level(self.graph, level, self._sequences)
        return self._units[level]

    def _fine_map(self, unit: SquashUnit) -> dict[CommitId, frozenset]:
        return {cid: self.fine(cid) for cid in unit.commits}

    def cgr(self, unit: SquashUnit) -> frozenset[RefactoringInstance]:
        return compute_cgr(unit, self.coarse(unit), self._fine_map(unit))

    def is_effective(self, unit: SquashUnit) -> bool:
        return bool(self.cgr(unit))

    def frequency(self, level: int) -> float:
        units = self.units(level)
        if not units:
            raise NoUnits(level)
        self.prefetch(units)
        return sum(self.is_effective(u) for u in units) / len(units)

    def ratio(self, type_name: TypeName, levels: Iterable[int] = DEFAULT_LEVELS) -> float | None:
        levels = sorted(set(levels))
        if not levels or any(lv < 2 for lv in levels):
            raise ValueError("ratio levels must be a non-empty set of integers >= 2")
        count = effective = 0
        for level in levels:
            units = self.units(level)
            self.prefetch(units)
            for unit in units:
                cgrs = self.cgr(unit)
                effective += bool(cgrs)
                count += sum(1 for r in cgrs if r.type == type_name)
        return count / effective if effective else None

    def prefetch(self, units: Iterable[SquashUnit]) -> None:
        """Run every detection the given units need, concurrently when jobs > 1."""
        pairs = set()
        for unit in units:
            pairs.add((self.graph.first_parent(unit.first), unit.last))
            for cid in unit.commits:
                pairs.add((self.graph.first_parent(cid), cid))
        ordered = sorted(pairs, key=lambda p: (p[0] or "", p[1]))
        if self.jobs == 1 or len(ordered) < 2:
            for p in ordered:
                self.detect_pair(*p)
            return
        with ThreadPoolExecutor(max_workers=self.jobs) as pool:
            # list() re-raises the first worker exception
            list(pool.map(lambda p: self.detect_pair(*p), ordered))

    def run(self, levels: Iterable[int] = DEFAULT_LEVELS, extension: str | None = None) -> AnalysisReport:
        levels = tuple(sorted(set(levels)))
        if not levels or any(lv < 1 for lv in levels):
            raise ValueError("levels must be a non-empty set of integers >= 1")
        all_units = {lv: self.units(lv) for lv in levels}
        log.info("%d straight sequences; units per level: %s", len(self._sequences),
                 ", ".join(f"{lv}={len(u)}" for lv, u in all_units.items()))
        self.prefetch(u for units in all_units.values() for u in units)

        level_rows, unit_rows, records = [], [], []
        for level in levels:
            effective = 0
            for unit in all_units[level]:
                fine = self._fine_map(unit)
                coarse = self.coarse(unit)
                cgrs = compute_cgr(unit, coarse, fine)
                effective += bool(cgrs)
                unit_rows.append(UnitSummary(
                    level, unit.strategy.offset, unit.sequence_id, unit.commits,
                    sum(len(v) for v in fine.values()), len(coarse), len(cgrs)))
                for inst in sorted_instances(cgrs):
                    records.append(CgrRecord(inst, unit, level, classify_cgr(inst, unit, fine)))
            level_rows.append(LevelSummary(level, len(all_units[level]), effective))

        ratio_levels = {lv for lv in levels if lv >= 2}
        effective_total = sum(s.effective for s in level_rows if s.level in ratio_levels)
        extra_types = sorted({str(r.instance.type) for r in records} - {t.value for t in RefactoringType})
        ratios = []
        for t in list(RefactoringType) + extra_types:
            count = sum(1 for r in records if r.level in ratio_levels and r.instance.type == t)
            ratios.append(TypeRatio(t, count, effective_total))

        config = AnalysisConfig(self.threshold, levels, extension or self.repo.extension)
        return AnalysisReport(config, tuple(level_rows), tuple(ratios), tuple(unit_rows), tuple(records))


def run_analysis(repo: Repository, levels: Iterable[int] = DEFAULT_LEVELS,
                 threshold: float = DEFAULT_THRESHOLD, jobs: int = 1,
                 pair_detector: PairDetector | None = None) -> AnalysisReport:
    return CgrAnalyzer(repo, threshold, jobs, pair_detector).run(levels)


def frequency(repo: Repository, level: int, threshold: float = DEFAULT_THRESHOLD) -> float:
    return CgrAnalyzer(repo, threshold).frequency(level)


def ratio(repo: Repository, type_name: TypeName, levels: Iterable[int] = DEFAULT_LEVELS,
          threshold: float = DEFAULT_THRESHOLD) -> float | None:
    return CgrAnalyzer(repo, threshold).ratio(type_name, levels)
