"""Mining coarse-grained refactorings: refactorings that only become visible
once several adjacent commits are squashed into one."""

from .analyzer import (
    AnalysisReport,
    CgrAnalyzer,
    CgrRecord,
    classify_cgr,
    compute_cgr,
    is_effective,
    ref_types,
    run_analysis,
)
from .code_model import Snapshot, build_snapshot, parse_source_file, tokenize
from .detector import (
    CodeLocation,
    RefactoringInstance,
    RefactoringType,
    detect,
    ingest_external_detections,
    match_entities,
    similarity,
    validate_location,
)
from .history import Commit, CommitGraph, StraightSequence, build_graph, extract_straight_sequences
from .repository import RepositorySource, open_repository, parse_script, dump_script
from .squash import CoarseCommit, SquashUnit, Strategy, extract_units, squash, units_at_level

__version__ = "0.1.0"
