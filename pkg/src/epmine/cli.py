"""Command-line front end: file-mediated pipeline stages plus a run manifest.

    epmine simulate --out-dir raw
    epmine convert raw/course.csv --out work/course.xes
    epmine preprocess work/course.xes --exclude raw/excluded.txt --out work/clean.xes
    epmine split work/clean.xes --by-grade raw/grades.csv --by-unit raw/units.tsv --out-dir split
    epmine report split --variant infrequent --threshold 0.2

Exit codes: 0 success, 1 bad input data, 2 bad configuration or usage.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .conformance import ALL_UNITS, COHORTS, fitness, fitness_cell, FitnessReport, scope_name
from .discovery import discover, discover_infrequent
from .log import CsvSchema, EventLog, LogFormatError, log_stats, parse_moodle_csv, write_moodle_csv
from .loggen import STAFF, synth_course
from .petri import tree_to_net
from .preprocess import (
    CodingScheme, ConfigError, GradeBook, MissingGradeError, UnitRule, UnknownActionError, anonymize,
    apply_coding, dedup, filter_actions, filter_cases, split_by_grade, split_by_unit,
)
from .tree import TreeSyntaxError, parse_tree, to_text
from .viz import annotate, net_to_dot, to_dot
from .xes import read_xes, write_xes

log = logging.getLogger("epmine")

MANIFEST = "manifest.json"


class InputError(Exception):
    """Bad or missing input data (exit 1)."""


class UsageError(Exception):
    """Bad configuration or arguments (exit 2)."""


# --- manifest -------------------------------------------------------------------

def sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    """What one subcommand run read and wrote, with content hashes."""

    command: str
    argv: list[str]
    cwd: str
    inputs: dict[str, str] = field(default_factory=dict)
    configs: dict[str, str] = field(default_factory=dict)
    variant: str | None = None
    threshold: float | None = None
    seed: int | None = None
    out_dir: str = ""
    outputs: dict[str, str] = field(default_factory=dict)

    def save(self) -> Path:
        """Merge this run into the output directory's manifest; a run that
        rewrites the same outputs replaces the earlier record."""
        path = Path(self.out_dir) / MANIFEST
        runs = load_manifest(path) if path.exists() else []
        runs = [r for r in runs if not set(r.outputs) & set(self.outputs)] + [self]
        doc = {"tool": "epmine", "version": __version__, "runs": [asdict(r) for r in runs]}
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def load_manifest(path: str | Path) -> list[RunManifest]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return [RunManifest(**r) for r in doc["runs"]]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"{path}: not a readable manifest ({exc})") from None


class _Run:
    """Collects inputs and outputs of the current subcommand."""

    def __init__(self, command: str, argv: list[str]):
        self.m = RunManifest(command, list(argv), os.getcwd())

    def input(self, path: str, config: bool = False) -> bytes:
        try:
            data = Path(path).read_bytes()
        except OSError as exc:
            err = UsageError if config else InputError
            raise err(f"cannot read {path}: {exc.strerror or exc}") from None
        (self.m.configs if config else self.m.inputs)[path] = hashlib.sha256(data).hexdigest()
        return data

    def config_text(self, path: str) -> str:
        try:
            return self.input(path, config=True).decode("utf-8")
        except UnicodeDecodeError:
            raise UsageError(f"{path}: not UTF-8 text") from None

    def output(self, path: str | Path, data: bytes) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self.m.outputs[str(path)] = hashlib.sha256(data).hexdigest()

    def finish(self, out_dir: str | Path | None = None) -> None:
        if not self.m.outputs:
            return
        dirs = {str(Path(p).parent) for p in self.m.outputs}
        if out_dir is None and len(dirs) != 1:
            raise AssertionError("outputs spread over several directories")
        self.m.out_dir = str(out_dir) if out_dir is not None else dirs.pop()
        self.m.save()


def _emit(run: _Run, out: str | None, text: str | bytes) -> None:
    data = text.encode("utf-8") if isinstance(text, str) else text
    if out:
        run.output(out, data)
        run.finish()
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


# --- readers ----------------------------------------------------------------------

def _read_log(run: _Run, path: str, schema: CsvSchema | None = None) -> EventLog:
    data = run.input(path)
    try:
        if path.lower().endswith(".csv"):
            return parse_moodle_csv(data, schema)
        return read_xes(data)
    except LogFormatError as exc:
        raise InputError(f"{path}: {exc}") from None


def _read_schema(run: _Run, path: str | None) -> CsvSchema | None:
    if not path:
        return None
    try:
        return CsvSchema(**json.loads(run.config_text(path)))
    except (ValueError, TypeError) as exc:
        raise UsageError(f"{path}: bad CSV schema ({exc})") from None


def _read_tree(run: _Run, path: str):
    try:
        return parse_tree(run.input(path).decode("utf-8").strip())
    except (TreeSyntaxError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _threshold(value: str) -> float:
    t = float(value)
    if not 0.0 <= t <= 1.0:
        raise argparse.ArgumentTypeError(f"threshold {value} outside [0, 1]")
    return t


def _mine(log: EventLog, variant: str, threshold: float):
    return discover(log) if variant == "basic" else discover_infrequent(log, threshold)


def _variant_name(variant: str, threshold: float) -> str:
    return "IM" if variant == "basic" else f"IMf (threshold {threshold:g})"


# --- subcommands -------------------------------------------------------------------

def cmd_simulate(a, run: _Run) -> None:
    raw, grades, rule = synth_course(a.units, a.students, a.pass_ratio, a.seed, a.noise)
    run.m.seed = a.seed
    out = Path(a.out_dir)
    rows = sorted(
        (("EPM", _fake_ip(e.case_id), e.timestamp, e.case_id, e.action, e.info)
         for t in raw.traces for e in t.events),
        key=lambda r: (r[2], r[3]),
    )
    run.output(out / "course.csv", write_moodle_csv(rows).encode("utf-8"))
    run.output(out / "grades.csv", grades.to_csv().encode("utf-8"))
    run.output(out / "units.tsv", rule.to_tsv().encode("utf-8"))
    run.output(out / "excluded.txt", "".join(s + "\n" for s in STAFF).encode("utf-8"))
    run.output(out / "coding.tsv", CodingScheme.default().to_tsv().encode("utf-8"))
    run.finish(out)
    log.info("simulated %d cases, %d events", *log_stats(raw))


def _fake_ip(name: str) -> str:
    h = hashlib.sha256(name.encode("utf-8")).digest()
    return f"10.{h[0]}.{h[1]}.{h[2]}"


def cmd_convert(a, run: _Run) -> None:
    lg = _read_log(run, a.input, _read_schema(run, a.schema))
    _emit(run, a.out, write_xes(lg))
    log.info("%d cases, %d events", *log_stats(lg))


def cmd_preprocess(a, run: _Run) -> None:
    scheme = CodingScheme.from_tsv(run.config_text(a.coding)) if a.coding else CodingScheme.default()
    excluded = run.config_text(a.exclude).split("\n") if a.exclude else []
    excluded = [x.strip() for x in excluded if x.strip()]
    lg = _read_log(run, a.input, _read_schema(run, a.schema))
    before = log_stats(lg)
    lg = dedup(lg)
    lg = filter_cases(lg, excluded)
    if a.unknown == "drop":
        lg = filter_actions(lg, scheme.actions)
    try:
        lg, dropped = apply_coding(lg, scheme, a.unknown)
    except UnknownActionError as exc:
        raise InputError(str(exc)) from None
    if a.salt:
        lg = anonymize(lg, a.salt.encode("utf-8"))
    _emit(run, a.out, write_xes(lg))
    after = log_stats(lg)
    log.info("%d -> %d cases, %d -> %d events", before.num_cases, after.num_cases, before.num_events, after.num_events)


def cmd_split(a, run: _Run) -> None:
    lg = _read_log(run, a.input)
    out = Path(a.out_dir)
    cohorts = {"All": lg}
    if a.by_grade:
        grades = GradeBook.from_csv(run.config_text(a.by_grade))
        if a.salt:
            grades = grades.anonymized(a.salt.encode("utf-8"))
        try:
            cohorts["Pass"], cohorts["Fail"] = split_by_grade(lg, grades, a.pass_mark)
        except MissingGradeError as exc:
            raise InputError(str(exc)) from None
    rule = UnitRule.from_tsv(run.config_text(a.by_unit)) if a.by_unit else None
    stats = []
    for cohort in COHORTS:
        if cohort not in cohorts:
            continue
        sub = cohorts[cohort]
        run.output(out / _cell_file(cohort, ALL_UNITS), write_xes(sub))
        if cohort != "All":
            stats.append((f"Group {cohort}", *log_stats(sub)))
        if rule is None:
            continue
        units, unassigned = split_by_unit(sub, rule)
        for k in range(1, rule.units + 1):
            run.output(out / _cell_file(cohort, k), write_xes(units[k]))
            if cohort == "All":
                stats.append((scope_name(k), *log_stats(units[k])))
        if cohort == "All" and unassigned.num_events:
            log.info("%d events matched no unit", unassigned.num_events)
    table = "Files\tNumber of Cases\tNumber of Events\n" + "".join(f"{n}\t{c}\t{e}\n" for n, c, e in stats)
    run.output(out / "stats.tsv", table.encode("utf-8"))
    run.finish(out)


def _cell_file(cohort: str, scope: int) -> str:
    return f"{cohort.lower()}_" + ("all_units" if scope == ALL_UNITS else f"unit_{scope:02d}") + ".xes"


_CELL_RE = re.compile(r"(pass|fail|all)_(all_units|unit_(\d+))\.xes\Z")


def cmd_discover(a, run: _Run) -> None:
    lg = _read_log(run, a.input)
    if not lg.traces:
        raise InputError(f"{a.input}: empty log")
    run.m.variant, run.m.threshold = a.variant, a.threshold
    tree = _mine(lg, a.variant, a.threshold)
    _emit(run, a.out, to_text(tree, ascii=a.ascii) + "\n")


def cmd_render(a, run: _Run) -> None:
    tree = _read_tree(run, a.tree)
    if a.net:
        _emit(run, a.out, net_to_dot(tree_to_net(tree)))
        return
    lg = _read_log(run, a.log) if a.log else EventLog(())
    model = annotate(tree, lg)
    for w in model.warnings:
        log.warning("%s", w)
    _emit(run, a.out, to_dot(model))


def cmd_fitness(a, run: _Run) -> None:
    tree = _read_tree(run, a.model)
    lg = _read_log(run, a.log)
    if not lg.traces:
        raise InputError(f"{a.log}: empty log, fitness is undefined")
    _emit(run, a.out, f"{fitness(tree_to_net(tree), lg):.3f}\n")


def _report_cell(job):
    path, variant, threshold = job
    lg = read_xes(Path(path).read_bytes())
    if not lg.traces:
        return None
    return fitness_cell(tree_to_net(_mine(lg, variant, threshold)), lg)


def cmd_report(a, run: _Run) -> None:
    src = Path(a.split_dir)
    if not src.is_dir():
        raise InputError(f"{src}: not a directory")
    cells = {}
    for p in sorted(src.iterdir()):
        m = _CELL_RE.match(p.name)
        if m:
            cohort = {"pass": "Pass", "fail": "Fail", "all": "All"}[m.group(1)]
            cells[(0 if m.group(3) is None else int(m.group(3)), cohort)] = str(p)
    if not cells:
        raise InputError(f"{src}: no split logs found (expected files like pass_unit_01.xes)")
    for path in cells.values():
        run.input(path)
    run.m.variant, run.m.threshold = a.variant, a.threshold
    keys = sorted(cells, key=lambda k: (k[0], COHORTS.index(k[1])))
    jobs = [(cells[k], a.variant, a.threshold) for k in keys]
    if a.jobs > 1:
        with ProcessPoolExecutor(max_workers=a.jobs) as pool:
            results = list(pool.map(_report_cell, jobs))
    else:
        results = [_report_cell(j) for j in jobs]
    report = FitnessReport(dict(zip(keys, results)), _variant_name(a.variant, a.threshold))
    _emit(run, a.out, report.render(a.format))


def cmd_rerun(a, run: _Run) -> int:
    path = Path(a.manifest)
    if path.is_dir():
        path = path / MANIFEST
    runs = load_manifest(path)
    bad = 0
    for r in runs:
        here = os.getcwd()
        try:
            os.chdir(r.cwd)
            code = main(r.argv)
            if code:
                log.error("%s: exited with %d", r.command, code)
                bad += 1
                continue
            for out, digest in sorted(r.outputs.items()):
                if not Path(out).exists() or sha256(out) != digest:
                    log.error("%s: %s differs from the recorded output", r.command, out)
                    bad += 1
        finally:
            os.chdir(here)
    if bad:
        return 1
    print(f"{len(runs)} run(s) reproduced byte-for-byte")
    return 0


# --- argument parsing -------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="epmine", description="Educational process mining pipeline.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="write a synthetic course (log, grades, unit rule, configs)")
    s.add_argument("--units", type=int, default=11)
    s.add_argument("--students", type=int, default=101)
    s.add_argument("--pass-ratio", type=float, default=0.72)
    s.add_argument("--noise", type=float, default=0.02, help="probability a study session gets one noise edit")
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--out-dir", required=True)

    s = sub.add_parser("convert", help="raw CSV export to XES")
    s.add_argument("input")
    s.add_argument("--schema", help="JSON file with CSV column settings")
    s.add_argument("--out")

    s = sub.add_parser("preprocess", help="dedup, drop excluded users and unlisted actions, code actions")
    s.add_argument("input", help="XES or CSV log")
    s.add_argument("--coding", help="TSV action<TAB>label (default: built-in scheme)")
    s.add_argument("--exclude", help="file with one user name per line to drop")
    s.add_argument("--unknown", choices=("drop", "error"), default="drop", help="policy for uncoded actions")
    s.add_argument("--salt", help="pseudonymize case ids with this key")
    s.add_argument("--schema", help="JSON file with CSV column settings (CSV input only)")
    s.add_argument("--out")

    s = sub.add_parser("split", help="split a coded log by cohort and unit")
    s.add_argument("input")
    s.add_argument("--by-grade", help="CSV case_id,grade")
    s.add_argument("--pass-mark", type=float, default=5.0)
    s.add_argument("--salt", help="key used when the log was pseudonymized")
    s.add_argument("--by-unit", help="TSV pattern<TAB>unit")
    s.add_argument("--out-dir", required=True)

    s = sub.add_parser("discover", help="mine a process tree")
    s.add_argument("input")
    s.add_argument("--variant", choices=("basic", "infrequent"), default="infrequent")
    s.add_argument("--threshold", type=_threshold, default=0.2)
    s.add_argument("--ascii", action="store_true", help="seq/xor/and/loop instead of glyphs")
    s.add_argument("--out")

    s = sub.add_parser("render", help="tree (+ log for frequencies) to DOT")
    s.add_argument("tree")
    s.add_argument("log", nargs="?")
    s.add_argument("--net", action="store_true", help="draw the workflow net instead")
    s.add_argument("--out")

    s = sub.add_parser("fitness", help="token-replay fitness of a tree against a log")
    s.add_argument("model")
    s.add_argument("log")
    s.add_argument("--out")

    s = sub.add_parser("report", help="fitness table over a split directory")
    s.add_argument("split_dir")
    s.add_argument("--variant", choices=("basic", "infrequent"), default="infrequent")
    s.add_argument("--threshold", type=_threshold, default=0.2)
    s.add_argument("--format", choices=("text", "csv", "md"), default="text")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out")

    s = sub.add_parser("rerun", help="re-run the runs recorded in a manifest and compare outputs")
    s.add_argument("manifest", help="manifest.json or the directory holding it")
    return p


COMMANDS = {
    "simulate": cmd_simulate, "convert": cmd_convert, "preprocess": cmd_preprocess, "split": cmd_split,
    "discover": cmd_discover, "render": cmd_render, "fitness": cmd_fitness, "report": cmd_report,
    "rerun": cmd_rerun,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        a = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"epmine: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if not logging.getLogger().handlers:
        logging.basicConfig(format="epmine: %(message)s", stream=sys.stderr)
    log.setLevel(logging.INFO if a.verbose else logging.WARNING)
    run = _Run(a.command, argv)
    try:
        return COMMANDS[a.command](a, run) or 0
    except (InputError, LogFormatError, MissingGradeError, UnknownActionError) as exc:
        print(f"epmine {a.command}: {exc}", file=sys.stderr)
        return 1
    except (UsageError, ConfigError) as exc:
        print(f"epmine {a.command}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:  # argument values the parser could not vet
        print(f"epmine {a.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
