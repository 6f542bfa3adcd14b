"""Minimal XES 1.0 reader/writer (concept and time extensions only)."""
from __future__ import annotations

import xml.etree.ElementTree as ET
from datetime import datetime

from .log import Event, EventLog, LogFormatError, Trace, parse_iso

XES_NS = "http://www.xes-standard.org/"

_EXTENSIONS = (
    ("Concept", "concept", "http://www.xes-standard.org/concept.xesext"),
    ("Time", "time", "http://www.xes-standard.org/time.xesext"),
)


class XesError(LogFormatError):
    pass


def _fmt_time(ts: datetime) -> str:
    spec = "milliseconds" if ts.microsecond % 1000 == 0 else "microseconds"
    return ts.isoformat(timespec=spec)


def _attr(parent, tag, key, value):
    ET.SubElement(parent, tag, {"key": key, "value": value})


def write_xes(log: EventLog) -> bytes:
    root = ET.Element("log", {"xes.version": "1.0", "xes.features": "", "xmlns": XES_NS})
    for name, prefix, uri in _EXTENSIONS:
        ET.SubElement(root, "extension", {"name": name, "prefix": prefix, "uri": uri})
    g = ET.SubElement(root, "global", {"scope": "trace"})
    _attr(g, "string", "concept:name", "UNKNOWN")
    g = ET.SubElement(root, "global", {"scope": "event"})
    _attr(g, "string", "concept:name", "UNKNOWN")
    _attr(g, "date", "time:timestamp", "1970-01-01T00:00:00.000")
    ET.SubElement(root, "classifier", {"name": "Activity", "keys": "concept:name"})
    for key in sorted(log.attributes):
        _attr(root, "string", key, log.attributes[key])
    for trace in log.traces:
        t = ET.SubElement(root, "trace")
        _attr(t, "string", "concept:name", trace.case_id)
        for e in trace.events:
            ev = ET.SubElement(t, "event")
            _attr(ev, "string", "concept:name", e.activity)
            _attr(ev, "date", "time:timestamp", _fmt_time(e.timestamp))
            _attr(ev, "string", "action", e.action)
            _attr(ev, "string", "info", e.info)
            if e.code is not None:
                _attr(ev, "string", "code", e.code)
    ET.indent(root, space="  ")
    body = ET.tostring(root, encoding="unicode")
    return ('<?xml version="1.0" encoding="UTF-8"?>\n' + body + "\n").encode("utf-8")


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _attrs(elem) -> dict[str, str]:
    out = {}
    for child in elem:
        if _local(child.tag) in ("string", "date", "int", "float", "boolean", "id") and "key" in child.attrib:
            out[child.attrib["key"]] = child.attrib.get("value", "")
    return out


def read_xes(data: bytes | str) -> EventLog:
    """Parse XES into an EventLog.

    Events without an ``action`` attribute (foreign logs) take their action
    from ``concept:name``.
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, col = exc.position
        reason = str(exc).split(":")[0]
        raise XesError(f"XML {reason} at line {line}, column {col}") from None
    if _local(root.tag) != "log":
        raise XesError(f"root element is <{_local(root.tag)}>, expected <log>")
    log_attrs = _attrs(root)
    traces = []
    for ti, t in enumerate(c for c in root if _local(c.tag) == "trace"):
        tattrs = _attrs(t)
        cid = tattrs.get("concept:name") or f"trace{ti}"
        events = []
        for ei, ev in enumerate(c for c in t if _local(c.tag) == "event"):
            a = _attrs(ev)
            if "concept:name" not in a:
                raise XesError(f"event {ei} of trace {cid!r} has no concept:name")
            if "time:timestamp" not in a:
                raise XesError(f"event {ei} of trace {cid!r} has no time:timestamp")
            try:
                ts = parse_iso(a["time:timestamp"])
            except ValueError:
                raise XesError(f"trace {cid!r}: bad timestamp {a['time:timestamp']!r}") from None
            events.append(Event(cid, a.get("action", a["concept:name"]), ts, a.get("info", ""), a.get("code")))
        events.sort(key=lambda e: e.timestamp)
        traces.append(Trace(cid, events))
    return EventLog(tuple(traces), log_attrs)
