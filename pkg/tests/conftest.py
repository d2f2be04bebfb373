from functools import lru_cache
from importlib import resources

import pytest

from cgrminer.code_model import build_snapshot
from cgrminer.repository import ScriptRepository, parse_script

from corpus import planted_scenarios

RELOCATED = "relocated_class.hist"
MERGED = "merged_package.hist"


def fixture_text(name: str) -> str:
    return resources.files("cgrminer.fixtures").joinpath(name).read_text(encoding="utf-8")


def fixture_path(name: str):
    return resources.files("cgrminer.fixtures").joinpath(name)


def load_fixture(name: str) -> ScriptRepository:
    return ScriptRepository(parse_script(fixture_text(name)))


@lru_cache(maxsize=None)
def fixture_pairs():
    """Every (before, after) snapshot pair the shipped fixtures give rise to."""
    pairs = [(build_snapshot(s.before), build_snapshot(s.after)) for s in planted_scenarios()]
    for name in (RELOCATED, MERGED):
        repo = load_fixture(name)
        ids = list(repo.graph)
        for i, before in enumerate(ids):
            for after in ids[i + 1:]:
                pairs.append((repo.read_snapshot(before), repo.read_snapshot(after)))
            pairs.append((repo.read_snapshot(None), repo.read_snapshot(before)))
    return tuple(pairs)


@pytest.fixture
def relocated():
    return load_fixture(RELOCATED)


@pytest.fixture
def merged():
    return load_fixture(MERGED)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    verdicts = getattr(test_acceptance, "VERDICTS", {})
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(verdicts):
        terminalreporter.write_line(verdicts[number])
