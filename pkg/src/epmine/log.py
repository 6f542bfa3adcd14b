"""Event-log data model and Moodle CSV ingestion."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, NamedTuple


class LogFormatError(ValueError):
    """Raised when an input log cannot be parsed."""


@dataclass(frozen=True)
class Event:
    case_id: str
    action: str
    timestamp: datetime
    info: str = ""
    code: str | None = None

    def __post_init__(self):
        if not self.case_id:
            raise ValueError("event case_id must be non-empty")
        if not self.action:
            raise ValueError("event action must be non-empty")

    @property
    def activity(self) -> str:
        """Activity identity used for mining: ``CODE|action`` once coded, else the bare action."""
        if self.code is None:
            return self.action
        return f"{self.code}|{self.action}"


@dataclass(frozen=True)
class Trace:
    case_id: str
    events: tuple[Event, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        for e in self.events:
            if e.case_id != self.case_id:
                raise ValueError(f"event of case {e.case_id!r} in trace {self.case_id!r}")
        for prev, nxt in zip(self.events, self.events[1:]):
            if nxt.timestamp < prev.timestamp:
                raise ValueError(f"trace {self.case_id!r} is not time-ordered")

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    @property
    def activities(self) -> tuple[str, ...]:
        return tuple(e.activity for e in self.events)


@dataclass(frozen=True)
class EventLog:
    traces: tuple[Trace, ...] = ()
    attributes: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "traces", tuple(self.traces))
        seen = set()
        for t in self.traces:
            if t.case_id in seen:
                raise ValueError(f"duplicate case_id {t.case_id!r}")
            seen.add(t.case_id)

    def __len__(self):
        return len(self.traces)

    def __iter__(self):
        return iter(self.traces)

    @property
    def num_events(self) -> int:
        return sum(len(t) for t in self.traces)

    def with_traces(self, traces: Iterable[Trace], **attrs: str) -> EventLog:
        """Copy of this log with new traces and extra/overridden attributes."""
        return EventLog(tuple(traces), {**self.attributes, **attrs})

    @classmethod
    def from_events(cls, events: Iterable[Event], attributes: dict[str, str] | None = None) -> EventLog:
        """Group events by case and sort each case by timestamp.

        Cases keep the order of their first appearance; equal timestamps keep
        input order (the sort is stable).
        """
        groups: dict[str, list[Event]] = {}
        for e in events:
            groups.setdefault(e.case_id, []).append(e)
        traces = [Trace(cid, sorted(evs, key=lambda e: e.timestamp)) for cid, evs in groups.items()]
        return cls(tuple(traces), dict(attributes or {}))


class LogStats(NamedTuple):
    num_cases: int
    num_events: int


def log_stats(log: EventLog) -> LogStats:
    return LogStats(len(log.traces), log.num_events)


def from_activity_sequences(seqs: Iterable[Iterable[str]], start: datetime | None = None) -> EventLog:
    """Build a log from plain activity sequences, one trace per sequence.

    Handy for fixtures: case ids are ``c0, c1, ...`` and events are spaced one
    second apart.
    """
    from datetime import timedelta

    start = start or datetime(2020, 1, 1)
    traces = []
    for i, seq in enumerate(seqs):
        cid = f"c{i}"
        evs = [Event(cid, a, start + timedelta(seconds=j)) for j, a in enumerate(seq)]
        traces.append(Trace(cid, evs))
    return EventLog(tuple(traces))


# --- Moodle CSV ------------------------------------------------------------

_DEFAULT_TIME_FORMATS = ("%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M")


def parse_timestamp(value: str, fmt: str | None = None) -> datetime:
    value = value.strip()
    if fmt is not None:
        try:
            return datetime.strptime(value, fmt)
        except ValueError:
            raise LogFormatError(f"unparseable timestamp {value!r} (expected format {fmt!r})") from None
    for f in _DEFAULT_TIME_FORMATS:
        try:
            return datetime.strptime(value, f)
        except ValueError:
            pass
    try:
        return parse_iso(value)
    except ValueError:
        raise LogFormatError(f"unparseable timestamp {value!r}") from None


def parse_iso(value: str) -> datetime:
    if value.endswith("Z"):
        value = value[:-1] + "+00:00"
    return datetime.fromisoformat(value)


@dataclass(frozen=True)
class CsvSchema:
    """Column layout of a raw LMS export.

    Each column is either a header name (matched case-insensitively) or a
    0-based index. ``course``, ``ip`` and ``info`` may be None when absent.
    """

    course: str | int | None = "course"
    ip: str | int | None = "ip"
    time: str | int = "time"
    name: str | int = "name"
    action: str | int = "action"
    info: str | int | None = "info"
    time_format: str | None = None
    delimiter: str = ","
    has_header: bool = True

    def __post_init__(self):
        for col in ("time", "name", "action"):
            if getattr(self, col) is None:
                raise ValueError(f"CsvSchema requires a {col!r} column")
        if not self.has_header:
            for col in ("course", "ip", "time", "name", "action", "info"):
                v = getattr(self, col)
                if v is not None and not isinstance(v, int):
                    raise ValueError(f"column {col!r} must be an index when the file has no header")

    def resolve(self, header: list[str] | None) -> dict[str, int]:
        lookup = {h.strip().lower(): i for i, h in enumerate(header or [])}
        out = {}
        for col in ("course", "ip", "time", "name", "action", "info"):
            v = getattr(self, col)
            if v is None:
                continue
            if isinstance(v, int):
                out[col] = v
            elif v.lower() in lookup:
                out[col] = lookup[v.lower()]
            elif col in ("time", "name", "action"):
                raise LogFormatError(f"required column {v!r} not found in header {header!r}")
        return out


def parse_moodle_csv(data: bytes | str, schema: CsvSchema | None = None) -> EventLog:
    """Parse a raw LMS export into an event log keeping time, name, action and info.

    Rows must all have the header's arity; course and IP columns are read
    but discarded.
    """
    schema = schema or CsvSchema()
    text = data.decode("utf-8-sig") if isinstance(data, bytes) else data
    reader = csv.reader(io.StringIO(text), delimiter=schema.delimiter)
    header = None
    cols = None
    arity = None
    events = []
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        if schema.has_header and header is None:
            header = row
            cols = schema.resolve(header)
            arity = len(header)
            continue
        if cols is None:
            cols = schema.resolve(None)
            arity = len(row)
        if len(row) != arity:
            raise LogFormatError(f"line {reader.line_num}: expected {arity} fields, got {len(row)}")
        try:
            ts = parse_timestamp(row[cols["time"]], schema.time_format)
        except LogFormatError as exc:
            raise LogFormatError(f"line {reader.line_num}: {exc}") from None
        name = row[cols["name"]].strip()
        action = row[cols["action"]].strip()
        if not name or not action:
            raise LogFormatError(f"line {reader.line_num}: empty name or action")
        info = row[cols["info"]].strip() if "info" in cols else ""
        events.append(Event(name, action, ts, info))
    return EventLog.from_events(events)


def write_moodle_csv(rows: Iterable[tuple[str, str, datetime, str, str, str]]) -> str:
    """Render (course, ip, time, name, action, info) rows with the default schema's header."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["course", "ip", "time", "name", "action", "info"])
    for course, ip, ts, name, action, info in rows:
        w.writerow([course, ip, ts.strftime("%Y-%m-%d %H:%M:%S"), name, action, info])
    return buf.getvalue()
