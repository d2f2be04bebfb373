"""Command-line entry point: ``cgrminer analyze | detect | plot``.

Exit codes: 0 success, 2 usage or configuration error, 3 repository or
commit error, 4 report schema or I/O error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .analyzer import DEFAULT_LEVELS, CgrAnalyzer
from .code_model import DEFAULT_EXTENSION
from .detector import DEFAULT_THRESHOLD, detect, sorted_instances
from .errors import CgrMinerError, SchemaError
from .report import PLOT_FILE, emit_report, read_report, report_boxplot
from .repository import RepositorySource, open_repository

log = logging.getLogger("cgrminer")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_REPOSITORY = 3
EXIT_REPORT = 4

JOBS_ENV = "CGRMINER_JOBS"


class ConfigError(Exception):
    pass


def _levels(text: str) -> tuple[int, ...]:
    try:
        levels = {int(part) for part in text.split(",") if part.strip()}
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid level list {text!r}") from None
    if not levels or min(levels) < 1:
        raise argparse.ArgumentTypeError("levels must be integers >= 1")
    return tuple(sorted(levels))


def _threshold(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid threshold {text!r}") from None
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError("threshold must lie in (0, 1]")
    return value


def _jobs(text: str) -> int:
    if text == "auto":
        return os.cpu_count() or 1
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid job count {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("job count must be positive")
    return value


def _add_source(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--repo", type=Path, metavar="DIR", help="git working directory")
    group.add_argument("--script", type=Path, metavar="FILE", help="history script")
    parser.add_argument("--ext", default=DEFAULT_EXTENSION, help="source file extension (default .java)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cgrminer",
                                     description="Detect coarse-grained refactorings in commit histories.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="run the full squash-and-compare analysis")
    _add_source(analyze)
    analyze.add_argument("--levels", type=_levels, default=DEFAULT_LEVELS, metavar="L1,L2,...")
    analyze.add_argument("--threshold", type=_threshold, default=DEFAULT_THRESHOLD)
    analyze.add_argument("--out", type=Path, default=Path("cgr-report"), metavar="DIR")
    analyze.add_argument("--format", choices=("structured", "tabular", "both"), default="both")
    analyze.add_argument("--jobs", type=_jobs, default=None, metavar="N",
                         help=f"worker threads (default ${JOBS_ENV} or 1; 'auto' = CPU count)")

    det = sub.add_parser("detect", help="list refactorings between two commits")
    _add_source(det)
    det.add_argument("before")
    det.add_argument("after")
    det.add_argument("--threshold", type=_threshold, default=DEFAULT_THRESHOLD)

    plot = sub.add_parser("plot", help="render an SVG box plot from a structured report")
    plot.add_argument("report", type=Path)
    plot.add_argument("out", type=Path)
    return parser


def _source(args) -> RepositorySource:
    if args.repo is not None:
        return RepositorySource("vcs-directory", args.repo)
    return RepositorySource("history-script", args.script)


def _resolve_jobs(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get(JOBS_ENV)
    if not env:
        return 1
    try:
        return _jobs(env)
    except argparse.ArgumentTypeError as exc:
        raise ConfigError(f"${JOBS_ENV}: {exc}") from None


def cmd_analyze(args) -> int:
    jobs = _resolve_jobs(args.jobs)
    repo = open_repository(_source(args), args.ext)
    log.info("analysing %d commits with levels %s, threshold %s, %d job(s)",
             len(repo.graph), ",".join(map(str, args.levels)), args.threshold, jobs)
    report = CgrAnalyzer(repo, args.threshold, jobs).run(args.levels, args.ext)
    written = emit_report(report, args.format, args.out)
    plot_path = args.out / PLOT_FILE
    plot_path.write_text(report_boxplot(report), encoding="utf-8", newline="")
    for path in written + [plot_path]:
        log.info("wrote %s", path)
    return EXIT_OK


def cmd_detect(args) -> int:
    repo = open_repository(_source(args), args.ext)
    before = repo.read_snapshot(args.before)
    after = repo.read_snapshot(args.after)
    for inst in sorted_instances(detect(before, after, args.threshold)):
        b = ";".join(map(str, inst.before_locations))
        a = ";".join(map(str, inst.after_locations))
        print(f"{inst.type}\t{inst.description}\t{b}\t{a}")
    return EXIT_OK


def cmd_plot(args) -> int:
    report = read_report(args.report)
    svg = report_boxplot(report)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(svg, encoding="utf-8", newline="")
    return EXIT_OK


def _configure_logging(verbose: bool) -> None:
    # our own handler, so progress reaches stderr even when the root logger is configured
    for h in [h for h in log.handlers if getattr(h, "_cgrminer", False)]:
        log.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    handler._cgrminer = True
    log.addHandler(handler)
    log.setLevel(logging.INFO if verbose else logging.WARNING)
    log.propagate = False


COMMANDS = {"analyze": cmd_analyze, "detect": cmd_detect, "plot": cmd_plot}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_CONFIG
    _configure_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"cgrminer: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemaError, OSError) as exc:
        print(f"cgrminer: {exc}", file=sys.stderr)
        return EXIT_REPORT
    except CgrMinerError as exc:  # repository, commit and detection errors
        print(f"cgrminer: {exc}", file=sys.stderr)
        return EXIT_REPOSITORY


if __name__ == "__main__":
    sys.exit(main())
