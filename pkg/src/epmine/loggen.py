"""Synthetic logs: trace sampling from process trees and a Moodle-shaped course."""
from __future__ import annotations

import random
from dataclasses import dataclass
from datetime import datetime, timedelta

from .log import Event, EventLog, Trace
from .preprocess import GradeBook, UnitRule
from .tree import TAU, Kind, Leaf, Tau, Tree, leaves, loop, normalize, seq, xor


@dataclass(frozen=True)
class GenConfig:
    n_traces: int = 100
    seed: int = 0
    max_loop_unrollings: int = 2
    noise_rate: float = 0.0
    timestamp_start: datetime = datetime(2020, 1, 1)
    step: timedelta = timedelta(minutes=1)

    def __post_init__(self):
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ValueError("noise_rate must be in [0, 1]")


def sample_trace(t: Tree, rng: random.Random, max_loop_unrollings: int) -> list[str]:
    if isinstance(t, Leaf):
        return [t.label]
    if isinstance(t, Tau):
        return []
    kids = t.children
    if t.kind is Kind.SEQ:
        return [a for c in kids for a in sample_trace(c, rng, max_loop_unrollings)]
    if t.kind is Kind.XOR:
        return sample_trace(rng.choice(kids), rng, max_loop_unrollings)
    if t.kind is Kind.AND:
        parts = [sample_trace(c, rng, max_loop_unrollings) for c in kids]
        pos = [0] * len(parts)
        out = []
        while True:
            live = [i for i, p in enumerate(parts) if pos[i] < len(p)]
            if not live:
                return out
            i = rng.choice(live)
            out.append(parts[i][pos[i]])
            pos[i] += 1
    out = sample_trace(kids[0], rng, max_loop_unrollings)
    if len(kids) > 1:
        repeats = 0
        while repeats < max_loop_unrollings and rng.random() < 0.5:
            out += sample_trace(rng.choice(kids[1:]), rng, max_loop_unrollings)
            out += sample_trace(kids[0], rng, max_loop_unrollings)
            repeats += 1
    return out


def add_noise(trace: list[str], alphabet: list[str], rng: random.Random) -> list[str]:
    """One uniformly chosen swap / insert / drop; impossible ops fall back to insert."""
    trace = list(trace)
    op = rng.choice(("swap", "insert", "drop"))
    if op == "swap" and len(trace) >= 2:
        i = rng.randrange(len(trace) - 1)
        trace[i], trace[i + 1] = trace[i + 1], trace[i]
    elif op == "drop" and trace:
        del trace[rng.randrange(len(trace))]
    else:
        trace.insert(rng.randrange(len(trace) + 1), rng.choice(alphabet))
    return trace


def sample_log(t: Tree, cfg: GenConfig) -> EventLog:
    rng = random.Random(cfg.seed)
    alphabet = sorted(set(leaves(t))) or ["noise"]
    width = len(str(max(cfg.n_traces - 1, 0)))
    traces = []
    for i in range(cfg.n_traces):
        acts = sample_trace(t, rng, cfg.max_loop_unrollings)
        if cfg.noise_rate and rng.random() < cfg.noise_rate:
            acts = add_noise(acts, alphabet, rng)
        cid = f"case{i:0{width}d}"
        evs = [Event(cid, a, cfg.timestamp_start + j * cfg.step) for j, a in enumerate(acts)]
        traces.append(Trace(cid, evs))
    return EventLog(tuple(traces), {"generator": "sample_log", "seed": str(cfg.seed)})


# --- synthetic course -------------------------------------------------------------

STAFF = ("Instructor", "Admin User", "Test User")
IRRELEVANT = ("calendar view", "user view", "course view")


def _l(*names):
    return [Leaf(n) for n in names]


def _blocks(unit: int) -> dict[str, Tree]:
    """The five study blocks of a unit session, keyed by letter."""
    if unit % 2:
        task = [Leaf("quiz attempt"), loop(Leaf("quiz continue attempt"), TAU), Leaf("quiz view summary")]
    else:
        task = _l("quiz attempt", "assign view", "assign submit")
    return {
        "A": seq(*_l("forum view discussion", "quiz view")),
        "L": seq(Leaf("URL view"), loop(Leaf("page view"), TAU), Leaf("resource view")),
        "P": seq(*task, Leaf("quiz close attempt")),
        "R": Leaf("quiz review"),
        "F": seq(Leaf("forum view forum"), xor(TAU, Leaf("forum update post")), loop(Leaf("forum add post"), TAU)),
    }


# Block order per unit for passing students (A discussion, L learning
# material, P practice, R review, F forum). Each non-default order only
# adds directly-follows edges that no other unit uses, so over the whole
# course they stay under a 0.2 filter while dominating their own unit.
UNIT_ORDERS = ("ALPRF", "ALPRF", "ALPRF", "RLAFP", "RAPLF", "ALRPF",
               "ALPRF", "ALPRF", "ALPRF", "ALPRF", "LPARF")


def unit_order(unit: int, fail: bool = False) -> str:
    order = UNIT_ORDERS[(unit - 1) % len(UNIT_ORDERS)]
    if fail:  # the same cycle entered at practice
        i = order.index("P")
        order = order[i:] + order[:i]
    return order


def unit_tree(unit: int, fail: bool = False) -> Tree:
    """One study session of a unit; failing students run the same cycle
    starting at practice (and repeat less, see ``synth_course``)."""
    blocks = _blocks(unit)
    return normalize(seq(*(blocks[k] for k in unit_order(unit, fail))))


def synth_course(units: int = 11, students: int = 101, pass_ratio: float = 0.72, seed: int = 7,
                 noise_rate: float = 0.02, start: datetime = datetime(2013, 2, 18, 9, 0)) -> tuple[EventLog, GradeBook, UnitRule]:
    """Raw (uncoded, named) course log with its grade book and unit rule.

    Each student works through every unit with 1-2 study sessions sampled
    from the unit tree; failing students drop out of later units now
    and then. The raw log also carries staff records, irrelevant actions,
    unassigned course-level events and duplicate rows for preprocessing to
    remove.
    """
    if not 0.0 <= pass_ratio <= 1.0 or not 0.0 <= noise_rate <= 1.0:
        raise ValueError("pass_ratio and noise_rate must be in [0, 1]")
    rng = random.Random(seed)
    n_pass = round(students * pass_ratio)
    names = [f"Student {i:03d}" for i in range(1, students + 1)]
    passing = set(rng.sample(names, n_pass))
    grades = {}
    events = []
    all_actions = sorted(set(leaves(unit_tree(1)) + leaves(unit_tree(2))))

    def emit(name, action, ts, info):
        events.append(Event(name, action, ts, info))
        if rng.random() < 0.02:
            events.append(Event(name, action, ts, info))

    for name in names:
        ok = name in passing
        grades[name] = round(rng.uniform(5.0, 10.0), 1) if ok else round(rng.uniform(0.0, 4.9), 1)
        ts = start + timedelta(minutes=rng.randrange(0, 600))
        for k in range(1, units + 1):
            if not ok and k > 3 and rng.random() < 0.12:
                continue
            tree = unit_tree(k, fail=not ok)
            ts = max(ts, start + timedelta(days=7 * (k - 1), minutes=rng.randrange(0, 3000)))
            for _ in range(rng.choice((1, 2))):
                acts = sample_trace(tree, rng, 3 if ok else 1)
                if rng.random() < noise_rate:
                    acts = add_noise(acts, all_actions, rng)
                for a in acts:
                    ts += timedelta(seconds=rng.randrange(20, 400))
                    emit(name, a, ts, f"Unit {k:02d}: {a}")
                    if rng.random() < 0.04:
                        ts += timedelta(seconds=rng.randrange(5, 60))
                        emit(name, rng.choice(IRRELEVANT), ts, "")
                ts += timedelta(hours=rng.randrange(2, 30))
        if rng.random() < 0.5:
            emit(name, "resource view", ts + timedelta(minutes=5), "Course guide")
    for staff in STAFF:
        for j in range(rng.randrange(20, 60)):
            k = rng.randrange(1, units + 1)
            emit(staff, rng.choice(all_actions), start + timedelta(days=7 * (k - 1), seconds=97 * j),
                 f"Unit {k:02d}: edit")
    rule = UnitRule(tuple((f"Unit {k:02d}", k) for k in range(1, units + 1)), units)
    log = EventLog.from_events(events, {"course": "synthetic", "seed": str(seed)})
    return log, GradeBook(grades), rule
