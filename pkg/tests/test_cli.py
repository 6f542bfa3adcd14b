import json
import re
import shutil
import subprocess
import sys

import pydot
import pytest

from conftest import run_cli
from epmine import __version__
from epmine.cli import MANIFEST, load_manifest
from epmine.log import from_activity_sequences
from epmine.xes import read_xes, write_xes


@pytest.fixture
def xes(tmp_path):
    path = tmp_path / "log.xes"
    path.write_bytes(write_xes(from_activity_sequences(["abc", "acb", "abc"])))
    return path


def test_discover_prints_the_tree(xes, capsys):
    assert run_cli("discover", xes, "--variant", "basic") == 0
    assert capsys.readouterr().out == "→(a, ∧(b, c))\n"
    assert run_cli("discover", xes, "--ascii") == 0
    assert capsys.readouterr().out == "seq(a, and(b, c))\n"


def test_discover_to_file_writes_a_manifest(xes, tmp_path):
    out = tmp_path / "models" / "m.tree"
    assert run_cli("discover", xes, "--threshold", "0.3", "--out", out) == 0
    (run,) = load_manifest(out.parent / MANIFEST)
    assert run.command == "discover" and run.variant == "infrequent" and run.threshold == 0.3
    assert set(run.inputs) == {str(xes)} and set(run.outputs) == {str(out)}


def test_fitness_of_a_tree_file(xes, tmp_path, capsys):
    model = tmp_path / "m.tree"
    model.write_text("seq(a, b, c)\n")
    assert run_cli("fitness", model, xes) == 0
    # two fitting traces (4, 4, 0, 0) and acb (4, 4, 1, 1): 1 - 1/12
    assert capsys.readouterr().out == "0.917\n"
    model.write_text("→(a, ∧(b, c))")
    assert run_cli("fitness", model, xes) == 0
    assert capsys.readouterr().out == "1.000\n"


def test_render_tree_and_net(xes, tmp_path, capsys, caplog):
    model = tmp_path / "m.tree"
    model.write_text("seq(a, and(b, x))")
    assert run_cli("render", model, xes) == 0
    assert pydot.graph_from_dot_data(capsys.readouterr().out)
    assert "activity 'c' (3 events) does not occur in the model" in caplog.text
    assert run_cli("render", model, "--net") == 0
    assert pydot.graph_from_dot_data(capsys.readouterr().out)


@pytest.mark.parametrize("argv,code", [
    ([], 2),
    (["frobnicate"], 2),
    (["discover"], 2),
    (["discover", "missing.xes"], 1),
    (["discover", "{xes}", "--threshold", "1.5"], 2),
    (["discover", "{xes}", "--variant", "alpha"], 2),
    (["report", "{tmp}"], 1),
    (["rerun", "{tmp}"], 2),
    (["fitness", "{bad_tree}", "{xes}"], 1),
    (["fitness", "{tree}", "{empty}"], 1),
    (["discover", "{bad_xes}"], 1),
    (["convert", "{bad_csv}"], 1),
    (["convert", "{csv}", "--schema", "{bad_json}"], 2),
    (["preprocess", "{xes}", "--coding", "{bad_tsv}"], 2),
    (["preprocess", "{csv}", "--unknown", "error"], 1),
    (["split", "{xes}", "--by-grade", "{grades}", "--out-dir", "{tmp}/s"], 1),
    (["split", "{xes}", "--by-unit", "{bad_tsv}", "--out-dir", "{tmp}/s"], 2),
])
def test_exit_codes(argv, code, xes, tmp_path, capsys):
    files = {
        "bad_tree": "seq(a,", "tree": "a", "bad_xes": "<log><trace>", "bad_csv": "time,name,action\nsoon,a,b\n",
        "csv": "time,name,action\n2020-01-01 10:00:00,ana,calendar view\n", "bad_json": "{",
        "bad_tsv": "page view\tREADING\n", "grades": "case_id,grade\nc0,5\n",
    }
    paths = {"xes": xes, "tmp": tmp_path}
    for name, text in files.items():
        ext = {"bad_xes": ".xes", "bad_csv": ".csv", "csv": ".csv"}.get(name, ".txt")
        paths[name] = tmp_path / (name + ext)
        paths[name].write_text(text)
    paths["empty"] = tmp_path / "empty.xes"
    paths["empty"].write_bytes(write_xes(from_activity_sequences([])))
    assert run_cli(*[a.format(**paths) for a in argv]) == code
    if code:
        assert capsys.readouterr().err.strip()


def test_version(capsys):
    assert run_cli("--version") == 0
    assert __version__ in capsys.readouterr().out


def test_module_entry_point(xes):
    r = subprocess.run([sys.executable, "-m", "epmine", "discover", str(xes), "--variant", "basic"],
                       capture_output=True, text=True, check=False)
    assert r.returncode == 0 and r.stdout == "→(a, ∧(b, c))\n"


def test_preprocess_pseudonyms_carry_through_split(tmp_path):
    raw = tmp_path / "raw.csv"
    raw.write_text("time,name,action,info\n"
                   "2020-01-01 10:00:00,ana,page view,Unit 01\n"
                   "2020-01-01 10:00:00,ana,page view,Unit 01\n"
                   "2020-01-01 10:01:00,bea,quiz view,Unit 02\n"
                   "2020-01-01 10:02:00,tutor,quiz view,Unit 02\n")
    (tmp_path / "ex.txt").write_text("tutor\n")
    (tmp_path / "grades.csv").write_text("ana,4.9\nbea,5.0\n")
    (tmp_path / "units.tsv").write_text("Unit 01\t1\nUnit 02\t2\n")
    clean = tmp_path / "clean.xes"
    assert run_cli("preprocess", raw, "--exclude", tmp_path / "ex.txt", "--salt", "k", "--out", clean) == 0
    log = read_xes(clean.read_bytes())
    assert len(log) == 2 and log.num_events == 2
    assert all(len(t.case_id) == 16 for t in log)
    assert run_cli("split", clean, "--by-grade", tmp_path / "grades.csv", "--salt", "k",
                   "--by-unit", tmp_path / "units.tsv", "--out-dir", tmp_path / "s") == 0
    assert read_xes((tmp_path / "s/fail_unit_01.xes").read_bytes()).num_events == 1
    assert len(read_xes((tmp_path / "s/fail_unit_02.xes").read_bytes())) == 0
    assert (tmp_path / "s/stats.tsv").read_text() == (
        "Files\tNumber of Cases\tNumber of Events\nGroup Pass\t1\t1\nGroup Fail\t1\t1\n"
        "Unit 1\t1\t1\nUnit 2\t1\t1\n")


# --- the default course pipeline -------------------------------------------------


def test_pipeline_files(pipeline):
    split = sorted(p.name for p in (pipeline / "split").iterdir())
    assert len(split) == 3 * 12 + 2
    assert "pass_all_units.xes" in split and "all_unit_11.xes" in split
    stats = (pipeline / "split/stats.tsv").read_text().splitlines()
    assert stats[0] == "Files\tNumber of Cases\tNumber of Events"
    assert [r.split("\t")[0] for r in stats[1:]] == ["Group Pass", "Group Fail"] + [f"Unit {k}" for k in range(1, 12)]
    passed, failed = (int(r.split("\t")[1]) for r in stats[1:3])
    assert (passed, failed) == (73, 28)


def test_pipeline_clean_log(pipeline, course):
    # the CSV export orders cases by first event, so compare case by case
    clean = read_xes((pipeline / "work/clean.xes").read_bytes())
    assert {t.case_id: t for t in clean} == {t.case_id: t for t in course[0]}


def test_pipeline_manifests(pipeline):
    doc = json.loads((pipeline / "work" / MANIFEST).read_text())
    assert doc["tool"] == "epmine"
    assert [r["command"] for r in doc["runs"]] == ["convert", "preprocess"]
    (sim,) = load_manifest(pipeline / "raw" / MANIFEST)
    assert sim.seed == 7 and len(sim.outputs) == 5


def test_report_formats(pipeline, tmp_path, capsys):
    assert run_cli("report", pipeline / "split", "--format", "csv") == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "Units,Pass students,Fail students,All students"
    assert len(rows) == 13
    text_row = (pipeline / "report/report.txt").read_text().splitlines()[1].split()
    assert rows[1] == ",".join(["All Units"] + text_row[2:])


def test_basic_miner_report_is_perfect(pipeline, capsys):
    assert run_cli("report", pipeline / "split", "--variant", "basic", "--jobs", 4, "--format", "md") == 0
    out = capsys.readouterr().out
    assert "miner: IM\n" in out
    values = [v.strip() for line in out.splitlines() if re.match(r"\| (All Units|Unit \d+) ", line)
              for v in line.strip("|").split("|")[1:]]
    assert values and set(values) == {"1.000"}


def test_rerun_detects_changed_outputs(pipeline, tmp_path):
    work = tmp_path / "raw"
    shutil.copytree(pipeline / "raw", work)
    doc = json.loads((work / MANIFEST).read_text())
    run = doc["runs"][0]
    run["argv"][run["argv"].index("--out-dir") + 1] = str(work)
    run["outputs"] = {str(work / "course.csv"): "0" * 64}
    (work / MANIFEST).write_text(json.dumps(doc))
    assert run_cli("rerun", work / MANIFEST) == 1
