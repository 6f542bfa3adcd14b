from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from epmine.cli import main  # noqa: E402
from epmine.loggen import STAFF, synth_course  # noqa: E402
from epmine.preprocess import (  # noqa: E402
    CodingScheme, apply_coding, dedup, filter_actions, filter_cases, split_by_grade,
)

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def course():
    """The clean synthetic course: (coded log, grade book, unit rule)."""
    raw, grades, rule = synth_course()
    clean = filter_actions(filter_cases(dedup(raw), STAFF), CodingScheme.default().actions)
    clean, _ = apply_coding(clean)
    return clean, grades, rule


@pytest.fixture(scope="session")
def cohorts(course):
    clean, grades, _ = course
    passed, failed = split_by_grade(clean, grades)
    return {"Pass": passed, "Fail": failed, "All": clean}


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    """The file-mediated pipeline on the default synthetic course; returns its root."""
    root = tmp_path_factory.mktemp("pipeline")
    steps = [
        ("simulate", "--units", 11, "--students", 101, "--seed", 7, "--out-dir", root / "raw"),
        ("convert", root / "raw/course.csv", "--out", root / "work/course.xes"),
        ("preprocess", root / "work/course.xes", "--exclude", root / "raw/excluded.txt",
         "--coding", root / "raw/coding.tsv", "--out", root / "work/clean.xes"),
        ("split", root / "work/clean.xes", "--by-grade", root / "raw/grades.csv",
         "--by-unit", root / "raw/units.tsv", "--out-dir", root / "split"),
        ("report", root / "split", "--variant", "infrequent", "--threshold", 0.2, "--jobs", 4,
         "--out", root / "report/report.txt"),
    ]
    for step in steps:
        assert run_cli(*step) == 0, step
    return root


# --- acceptance verdicts ------------------------------------------------------------

_VERDICTS: dict[str, str] = {}


@pytest.fixture
def verdict(request):
    """Records one PASS/FAIL line for an acceptance criterion.

    The test fills ``rec["id"]`` and ``rec["detail"]``; the outcome comes
    from the test result itself.
    """
    rec = {"id": request.node.name, "detail": ""}
    yield rec
    call = getattr(request.node, "rep_call", None)
    ok = call is not None and call.passed
    _VERDICTS[rec["id"]] = f"{rec['id']}: {'PASS' if ok else 'FAIL'}" + (f"  {rec['detail']}" if rec["detail"] else "")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(_VERDICTS, key=lambda k: int(k[2:]) if k[2:].isdigit() else 99):
            terminalreporter.write_line(_VERDICTS[key])
