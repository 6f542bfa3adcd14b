"""Cleaning, coding and splitting of raw LMS logs.

Typical order: dedup -> filter_cases -> filter_actions -> apply_coding ->
anonymize, then split_by_grade / split_by_unit on the coded log.
"""
from __future__ import annotations

import csv
import hashlib
import hmac
import io
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Literal

from .log import Event, EventLog, Trace

PLANNING = "PLANNING"
LEARNING = "LEARNING"
EXECUTING = "EXECUTING"
REVIEW = "REVIEW"
FORUM = "FORUM PEER LEARNING"
LABELS = (PLANNING, LEARNING, EXECUTING, REVIEW, FORUM)

DEFAULT_CODING = {
    "assign submit": EXECUTING,
    "assign view": PLANNING,
    "forum add discussion": FORUM,
    "forum add post": FORUM,
    "forum update post": FORUM,
    "forum view discussion": FORUM,
    "forum view forum": FORUM,
    "page view": LEARNING,
    "quiz attempt": EXECUTING,
    "quiz close attempt": EXECUTING,
    "quiz continue attempt": EXECUTING,
    "quiz review": REVIEW,
    "quiz view": PLANNING,
    "quiz view summary": PLANNING,
    "resource view": LEARNING,
    "URL view": LEARNING,
}


class ConfigError(ValueError):
    """Bad configuration table (coding scheme, unit rule, grade book)."""


class UnknownActionError(ValueError):
    pass


class MissingGradeError(ValueError):
    def __init__(self, case_ids):
        self.case_ids = sorted(case_ids)
        super().__init__("no grade for case(s): " + ", ".join(self.case_ids))


def _tsv_rows(text: str, ncols: int, what: str):
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != ncols:
            raise ConfigError(f"{what} line {lineno}: expected {ncols} tab-separated fields, got {len(parts)}")
        yield lineno, [p.strip() for p in parts]


@dataclass(frozen=True)
class CodingScheme:
    mapping: dict[str, str]

    def __post_init__(self):
        bad = {a: l for a, l in self.mapping.items() if l not in LABELS}
        if bad:
            raise ConfigError(f"labels outside the coding vocabulary: {bad}")

    @classmethod
    def default(cls) -> CodingScheme:
        return cls(dict(DEFAULT_CODING))

    @classmethod
    def from_tsv(cls, text: str) -> CodingScheme:
        mapping = {}
        for lineno, (action, label) in _tsv_rows(text, 2, "coding scheme"):
            if label not in LABELS:
                raise ConfigError(f"coding scheme line {lineno}: unknown label {label!r}")
            mapping[action] = label
        return cls(mapping)

    def to_tsv(self) -> str:
        return "".join(f"{a}\t{l}\n" for a, l in self.mapping.items())

    @property
    def actions(self) -> frozenset[str]:
        return frozenset(self.mapping)


@dataclass(frozen=True)
class GradeBook:
    grades: dict[str, float]

    def __post_init__(self):
        for cid, g in self.grades.items():
            if not 0.0 <= g <= 10.0:
                raise ConfigError(f"grade {g} for {cid!r} outside [0, 10]")

    @classmethod
    def from_csv(cls, text: str) -> GradeBook:
        grades = {}
        for lineno, row in enumerate(csv.reader(io.StringIO(text)), 1):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 2:
                raise ConfigError(f"grade book line {lineno}: expected case_id,grade")
            cid, g = row[0].strip(), row[1].strip()
            try:
                grades[cid] = float(g)
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise ConfigError(f"grade book line {lineno}: bad grade {g!r}") from None
        return cls(grades)

    def to_csv(self) -> str:
        return "case_id,grade\n" + "".join(f"{c},{g:.1f}\n" for c, g in self.grades.items())

    def anonymized(self, salt: bytes) -> GradeBook:
        return GradeBook({pseudonym(c, salt): g for c, g in self.grades.items()})


@dataclass(frozen=True)
class UnitRule:
    """Ordered (pattern, unit) pairs; the first pattern found in ``info`` wins.

    A pattern is a plain substring, or a regular expression when prefixed
    with ``re:`` (searched, so anchor it explicitly if needed).
    """

    rules: tuple[tuple[str, int], ...]
    units: int

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        for pat, k in self.rules:
            if not 1 <= k <= self.units:
                raise ConfigError(f"unit {k} for pattern {pat!r} outside 1..{self.units}")
            if pat.startswith("re:"):
                try:
                    re.compile(pat[3:])
                except re.error as exc:
                    raise ConfigError(f"bad regex {pat!r}: {exc}") from None

    @classmethod
    def from_tsv(cls, text: str, units: int | None = None) -> UnitRule:
        rules = []
        for lineno, (pat, k) in _tsv_rows(text, 2, "unit rule"):
            try:
                rules.append((pat, int(k)))
            except ValueError:
                raise ConfigError(f"unit rule line {lineno}: bad unit id {k!r}") from None
        if units is None:
            units = max((k for _, k in rules), default=0)
        return cls(tuple(rules), units)

    def to_tsv(self) -> str:
        return "".join(f"{p}\t{k}\n" for p, k in self.rules)

    def unit_of(self, info: str) -> int | None:
        for pat, k in self.rules:
            if pat.startswith("re:"):
                if re.search(pat[3:], info):
                    return k
            elif pat in info:
                return k
        return None


@dataclass(frozen=True)
class EventClass:
    action: str
    code: str

    @property
    def name(self) -> str:
        return f"{self.code}|{self.action}"


def event_class(e: Event) -> EventClass:
    if e.code is None:
        raise ValueError(f"event {e.action!r} of case {e.case_id!r} has no high-level code")
    return EventClass(e.action, e.code)


def _rebuild(log: EventLog, traces: Iterable[Trace], **attrs) -> EventLog:
    return log.with_traces([t for t in traces if t.events], **attrs)


def pseudonym(name: str, salt: bytes) -> str:
    return hmac.new(salt, name.encode("utf-8"), hashlib.sha256).hexdigest()[:16]


def anonymize(log: EventLog, salt: bytes) -> EventLog:
    """Replace each case id by a keyed-hash pseudonym (16 hex chars)."""
    mapping = {t.case_id: pseudonym(t.case_id, salt) for t in log.traces}
    if len(set(mapping.values())) != len(mapping):
        raise ValueError("pseudonym collision; use a different salt")
    traces = []
    for t in log.traces:
        new = mapping[t.case_id]
        evs = [Event(new, e.action, e.timestamp, e.info, e.code) for e in t.events]
        traces.append(Trace(new, evs))
    return log.with_traces(traces)


def dedup(log: EventLog) -> EventLog:
    traces = []
    for t in log.traces:
        seen = set()
        kept = []
        for e in t.events:
            key = (e.case_id, e.action, e.timestamp, e.info)
            if key not in seen:
                seen.add(key)
                kept.append(e)
        traces.append(Trace(t.case_id, kept))
    return log.with_traces(traces)


def filter_cases(log: EventLog, excluded: Iterable[str]) -> EventLog:
    excluded = set(excluded)
    return log.with_traces(t for t in log.traces if t.case_id not in excluded)


def filter_actions(log: EventLog, whitelist: Iterable[str]) -> EventLog:
    whitelist = set(whitelist)
    return _rebuild(log, (Trace(t.case_id, [e for e in t.events if e.action in whitelist]) for t in log.traces))


def apply_coding(
    log: EventLog,
    scheme: CodingScheme | None = None,
    unknown_policy: Literal["drop", "error"] = "drop",
) -> tuple[EventLog, Counter]:
    """Set each event's high-level code; returns the coded log and a count of dropped actions."""
    if unknown_policy not in ("drop", "error"):
        raise ValueError(f"unknown_policy must be 'drop' or 'error', not {unknown_policy!r}")
    scheme = scheme or CodingScheme.default()
    dropped: Counter = Counter()
    traces = []
    for t in log.traces:
        evs = []
        for e in t.events:
            label = scheme.mapping.get(e.action)
            if label is None:
                if unknown_policy == "error":
                    raise UnknownActionError(f"action {e.action!r} has no high-level code")
                dropped[e.action] += 1
                continue
            evs.append(Event(e.case_id, e.action, e.timestamp, e.info, label))
        traces.append(Trace(t.case_id, evs))
    return _rebuild(log, traces), dropped


def split_by_grade(log: EventLog, grades: GradeBook, threshold: float = 5.0) -> tuple[EventLog, EventLog]:
    missing = [t.case_id for t in log.traces if t.case_id not in grades.grades]
    if missing:
        raise MissingGradeError(missing)
    passed = [t for t in log.traces if grades.grades[t.case_id] >= threshold]
    failed = [t for t in log.traces if grades.grades[t.case_id] < threshold]
    return log.with_traces(passed, cohort="Pass"), log.with_traces(failed, cohort="Fail")


def split_by_unit(log: EventLog, rule: UnitRule) -> tuple[dict[int, EventLog], EventLog]:
    """Route events to units by their info attribute.

    Returns a log for every unit 1..K (possibly empty) and the log of
    events no pattern matched.
    """
    buckets: dict[int | None, list[Trace]] = {k: [] for k in range(1, rule.units + 1)}
    buckets[None] = []
    for t in log.traces:
        per: dict[int | None, list[Event]] = {}
        for e in t.events:
            per.setdefault(rule.unit_of(e.info), []).append(e)
        for k, evs in per.items():
            buckets[k].append(Trace(t.case_id, evs))
    units = {k: log.with_traces(buckets[k], unit=str(k)) for k in range(1, rule.units + 1)}
    return units, log.with_traces(buckets[None], unit="unassigned")
