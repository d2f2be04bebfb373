import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest

from cgrminer.cli import EXIT_CONFIG, EXIT_OK, EXIT_REPORT, EXIT_REPOSITORY, main
from cgrminer.report import read_report

from conftest import RELOCATED, MERGED, fixture_path


@pytest.fixture
def relocated_script(tmp_path):
    path = tmp_path / RELOCATED
    path.write_text(fixture_path(RELOCATED).read_text(encoding="utf-8"), encoding="utf-8")
    return path


def test_analyze_writes_all_outputs(relocated_script, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["analyze", "--script", str(relocated_script), "--out", str(out)]) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == [
        "cgrs.csv", "frequency.csv", "frequency.svg", "ratio.csv", "report.json"]
    assert read_report(out / "report.json").config.levels == (2, 3, 4)
    assert capsys.readouterr().out == ""  # progress goes to stderr only


def test_analyze_verbose_logs_to_stderr(relocated_script, tmp_path, capsys):
    assert main(["-v", "analyze", "--script", str(relocated_script), "--out", str(tmp_path / "o"),
                 "--format", "structured"]) == EXIT_OK
    captured = capsys.readouterr()
    assert captured.out == "" and "wrote" in captured.err


@pytest.mark.parametrize("args", [
    [],
    ["analyze"],
    ["analyze", "--script", "x", "--levels", "0"],
    ["analyze", "--script", "x", "--levels", "a,b"],
    ["analyze", "--script", "x", "--threshold", "0"],
    ["analyze", "--script", "x", "--threshold", "1.5"],
    ["analyze", "--script", "x", "--jobs", "0"],
    ["analyze", "--script", "x", "--repo", "y"],
    ["analyze", "--script", "x", "--format", "xml"],
    ["frobnicate"],
])
def test_usage_errors_exit_2(args, capsys):
    assert main(args) == EXIT_CONFIG
    assert "usage" in capsys.readouterr().err


def test_bad_jobs_environment_exit_2(relocated_script, tmp_path, monkeypatch):
    monkeypatch.setenv("CGRMINER_JOBS", "many")
    assert main(["analyze", "--script", str(relocated_script), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_jobs_environment_fallback(relocated_script, tmp_path, monkeypatch):
    monkeypatch.setenv("CGRMINER_JOBS", "3")
    assert main(["analyze", "--script", str(relocated_script), "--out", str(tmp_path / "o")]) == EXIT_OK


def test_repository_errors_exit_3(tmp_path):
    assert main(["analyze", "--script", str(tmp_path / "missing.hist")]) == EXIT_REPOSITORY
    assert main(["analyze", "--repo", str(tmp_path)]) == EXIT_REPOSITORY
    bad = tmp_path / "bad.hist"
    bad.write_text("commit a\nparent zz\n")
    assert main(["analyze", "--script", str(bad), "--out", str(tmp_path / "o")]) == EXIT_REPOSITORY


def test_detect_listing(relocated_script, capsys):
    assert main(["detect", "--script", str(relocated_script), "base", "9ce3ceb"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 1
    fields = lines[0].split("\t")
    assert len(fields) == 4 and fields[0] == "MoveClass"
    assert main(["detect", "--script", str(relocated_script), "2ae0e5f", "2ae0e5f"]) == EXIT_OK
    assert capsys.readouterr().out == ""


def test_detect_unknown_commit_exit_3(relocated_script):
    assert main(["detect", "--script", str(relocated_script), "base", "deadbeef"]) == EXIT_REPOSITORY


def test_plot(relocated_script, tmp_path):
    out = tmp_path / "out"
    assert main(["analyze", "--script", str(relocated_script), "--out", str(out), "--format", "structured"]) == 0
    svg = tmp_path / "plots" / "f.svg"
    assert main(["plot", str(out / "report.json"), str(svg)]) == EXIT_OK
    root = ET.parse(svg).getroot()
    assert root.tag.endswith("svg")
    assert svg.read_text() == (out / "frequency.svg").read_text()


def test_plot_errors_exit_4(tmp_path):
    bad = tmp_path / "r.json"
    bad.write_text('{"format": "something-else"}')
    assert main(["plot", str(bad), str(tmp_path / "x.svg")]) == EXIT_REPORT
    assert main(["plot", str(tmp_path / "missing.json"), str(tmp_path / "x.svg")]) == EXIT_REPORT
    empty = tmp_path / "empty.json"
    empty.write_text('{"format": "cgrminer-report/1", "config": {"threshold": 0.5, "levels": [], '
                     '"extension": ".java", "classification": "heuristic:file-overlap"}, '
                     '"levels": [], "ratios": [], "units": [], "cgrs": []}')
    assert main(["plot", str(empty), str(tmp_path / "x.svg")]) == EXIT_REPORT


def test_module_entry_point(tmp_path):
    script = fixture_path(MERGED)
    proc = subprocess.run([sys.executable, "-m", "cgrminer", "detect", "--script", str(script),
                           "base", "989bf50"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "MergePackage" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "cgrminer", "analyze", "--levels", "0", "--script", "x"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
