"""Inductive Miner (basic and infrequent variants) over directly-follows graphs.

Internally logs are handled as variant multisets: ``Counter`` mapping an
activity tuple to its frequency.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

from .log import EventLog
from .tree import TAU, Kind, Leaf, Op, Tree, normalize

log = logging.getLogger(__name__)

Variants = Counter  # Counter[tuple[str, ...]]


@dataclass
class Dfg:
    activities: frozenset = frozenset()
    edges: Counter = field(default_factory=Counter)
    start_acts: Counter = field(default_factory=Counter)
    end_acts: Counter = field(default_factory=Counter)
    empty_trace_count: int = 0

    def successors(self, a) -> set:
        return {b for (x, b) in self.edges if x == a}


@dataclass(frozen=True)
class Cut:
    kind: Kind
    parts: tuple[frozenset, ...]


def to_variants(log_or_seqs) -> Variants:
    if isinstance(log_or_seqs, EventLog):
        return Counter(t.activities for t in log_or_seqs.traces)
    if isinstance(log_or_seqs, Counter):
        return log_or_seqs
    return Counter(tuple(s) for s in log_or_seqs)


def build_dfg(log) -> Dfg:
    """Directly-follows graph of an EventLog, a variant Counter or plain sequences."""
    variants = to_variants(log)
    d = Dfg()
    acts = set()
    for trace, n in variants.items():
        if not trace:
            d.empty_trace_count += n
            continue
        acts.update(trace)
        d.start_acts[trace[0]] += n
        d.end_acts[trace[-1]] += n
        for a, b in zip(trace, trace[1:]):
            d.edges[(a, b)] += n
    d.activities = frozenset(acts)
    return d


def filter_dfg(d: Dfg, threshold: float) -> Dfg:
    """Drop edges weaker than ``threshold`` x the strongest outgoing edge of their source.

    Start and end are treated as edges from a virtual source and to a
    virtual sink: a start count is compared with the largest start count,
    an end count with the largest outgoing edge of its activity (end
    included).
    """
    out_max: Counter = Counter()
    for (a, _), n in d.edges.items():
        out_max[a] = max(out_max[a], n)
    for a, n in d.end_acts.items():
        out_max[a] = max(out_max[a], n)
    start_max = max(d.start_acts.values(), default=0)
    return Dfg(
        d.activities,
        Counter({e: n for e, n in d.edges.items() if n >= threshold * out_max[e[0]]}),
        Counter({a: n for a, n in d.start_acts.items() if n >= threshold * start_max}),
        Counter({a: n for a, n in d.end_acts.items() if n >= threshold * out_max[a]}),
        d.empty_trace_count,
    )


# --- graph helpers ------------------------------------------------------------

def _components(nodes, adjacent) -> list[frozenset]:
    """Connected components; ``adjacent(a)`` yields neighbours of ``a``."""
    seen = set()
    comps = []
    for n in sorted(nodes):
        if n in seen:
            continue
        comp = {n}
        stack = [n]
        seen.add(n)
        while stack:
            x = stack.pop()
            for y in adjacent(x):
                if y not in seen:
                    seen.add(y)
                    comp.add(y)
                    stack.append(y)
        comps.append(frozenset(comp))
    return comps


def _reachability(nodes, succ: dict) -> dict:
    reach = {}
    for n in nodes:
        seen = set()
        stack = list(succ.get(n, ()))
        while stack:
            x = stack.pop()
            if x not in seen:
                seen.add(x)
                stack.extend(succ.get(x, ()))
        reach[n] = seen
    return reach


def _succ_map(d: Dfg) -> dict:
    succ: dict = {a: set() for a in d.activities}
    for a, b in d.edges:
        succ[a].add(b)
    return succ


def _sort_parts(parts) -> tuple[frozenset, ...]:
    return tuple(sorted(parts, key=lambda p: min(p)))


# --- cuts ---------------------------------------------------------------------

def xor_cut(d: Dfg) -> Cut | None:
    nbr: dict = {a: set() for a in d.activities}
    for a, b in d.edges:
        nbr[a].add(b)
        nbr[b].add(a)
    comps = _components(d.activities, nbr.__getitem__)
    return Cut(Kind.XOR, _sort_parts(comps)) if len(comps) > 1 else None


def seq_cut(d: Dfg) -> Cut | None:
    reach = _reachability(d.activities, _succ_map(d))
    # merge activities that are mutually reachable (same SCC) or mutually unreachable
    def linked(a):
        return (b for b in d.activities if b != a and ((b in reach[a]) == (a in reach[b])))

    groups = _components(d.activities, linked)
    if len(groups) < 2:
        return None
    # order groups by reachability; validate the result is a proper sequence
    before = {g: sum(1 for h in groups if h is not g and any(y in reach[x] for x in h for y in g)) for g in groups}
    ordered = sorted(groups, key=lambda g: (before[g], min(g)))
    for i, g in enumerate(ordered):
        for h in ordered[i + 1:]:
            for x in g:
                for y in h:
                    if y not in reach[x] or x in reach[y]:
                        return None
    return Cut(Kind.SEQ, tuple(ordered))


def and_cut(d: Dfg) -> Cut | None:
    edges = d.edges

    def not_mutual(a):
        return (b for b in d.activities if b != a and not ((a, b) in edges and (b, a) in edges))

    comps = _components(d.activities, not_mutual)
    if len(comps) < 2:
        return None
    good = [c for c in comps if any(a in d.start_acts for a in c) and any(a in d.end_acts for a in c)]
    bad = [c for c in comps if c not in good]
    if len(good) < 2:
        return None
    if bad:
        good[0] = good[0].union(*bad)
    return Cut(Kind.AND, _sort_parts(good))


def loop_cut(d: Dfg) -> Cut | None:
    start, end = set(d.start_acts), set(d.end_acts)
    body = start | end
    if not body:
        return None
    rest = d.activities - body
    nbr: dict = {a: set() for a in rest}
    for a, b in d.edges:
        if a in rest and b in rest:
            nbr[a].add(b)
            nbr[b].add(a)
    candidates = _components(rest, nbr.__getitem__)
    changed = True
    while changed:
        changed = False
        for comp in list(candidates):
            ok = True
            into = {(a, b) for (a, b) in d.edges if b in comp and a not in comp}
            outof = {(a, b) for (a, b) in d.edges if a in comp and b not in comp}
            # entries come only from body end activities, exits go only to body start activities
            if any(a not in body or a not in end for a, _ in into):
                ok = False
            elif any(b not in body or b not in start for _, b in outof):
                ok = False
            else:
                entered = {b for _, b in into}
                left = {a for a, _ in outof}
                if not entered or not left:
                    ok = False
                elif any((e, c) not in d.edges for c in entered for e in end):
                    ok = False
                elif any((c, s) not in d.edges for c in left for s in start):
                    ok = False
            if not ok:
                body |= comp
                candidates.remove(comp)
                changed = True
    if not candidates:
        return None
    return Cut(Kind.LOOP, (frozenset(body),) + _sort_parts(candidates))


def find_cut(d: Dfg) -> Cut | None:
    for finder in (xor_cut, seq_cut, and_cut, loop_cut):
        cut = finder(d)
        if cut is not None:
            _check_partition(cut, d.activities)
            return cut
    return None


def _check_partition(cut: Cut, acts) -> None:
    seen = set()
    for p in cut.parts:
        if not p or p & seen:
            raise AssertionError(f"cut parts overlap or are empty: {cut}")
        seen |= p
    if seen != set(acts):
        raise AssertionError(f"cut parts do not cover the activities: {cut}")


# --- log splitting ----------------------------------------------------------------

@dataclass
class SplitStats:
    mixed_traces: int = 0


def split_log(variants, cut: Cut, stats: SplitStats | None = None) -> list[Variants]:
    variants = to_variants(variants)
    part_of = {a: i for i, p in enumerate(cut.parts) for a in p}
    subs = [Counter() for _ in cut.parts]
    k = len(cut.parts)
    for trace, n in variants.items():
        if cut.kind is Kind.XOR:
            counts = Counter(part_of[a] for a in trace)
            if len(counts) > 1 and stats is not None:
                stats.mixed_traces += n
            best = max(range(k), key=lambda i: (counts[i], -i))
            subs[best][tuple(a for a in trace if part_of[a] == best)] += n
        elif cut.kind in (Kind.SEQ, Kind.AND):
            for i in range(k):
                subs[i][tuple(a for a in trace if part_of[a] == i)] += n
        else:
            _split_loop_trace(trace, n, part_of, subs)
    return subs


def _split_loop_trace(trace, n, part_of, subs):
    runs = []
    for a in trace:
        p = part_of[a]
        if runs and runs[-1][0] == p:
            runs[-1][1].append(a)
        else:
            runs.append((p, [a]))
    # body and redo runs must alternate, starting and ending with the body
    prev = None
    for p, acts in runs:
        if p != 0 and prev != 0:
            subs[0][()] += n
        subs[p][tuple(acts)] += n
        prev = p
    if prev != 0:
        subs[0][()] += n


# --- the miner ------------------------------------------------------------------

def _flower(acts) -> Tree:
    acts = sorted(acts)
    inner = Leaf(acts[0]) if len(acts) == 1 else Op(Kind.XOR, tuple(Leaf(a) for a in acts))
    return Op(Kind.LOOP, (inner, TAU))


def _tau_loop_split(variants: Variants, d: Dfg, strict: bool = True) -> Variants | None:
    """Cut traces before start activities.

    The strict form only cuts where an end activity is directly followed by
    a start activity; the loose form cuts before every non-initial start
    activity. Returns None when no trace would be cut.
    """
    chunks: Variants = Counter()
    cut_any = False
    for trace, n in variants.items():
        last = 0
        for i in range(1, len(trace)):
            if trace[i] in d.start_acts and (not strict or trace[i - 1] in d.end_acts):
                chunks[trace[last:i]] += n
                last = i
                cut_any = True
        chunks[trace[last:]] += n
    return chunks if cut_any else None


def _mine(variants: Variants, threshold: float | None, depth: int = 0) -> Tree:
    total = sum(variants.values())
    empty = variants.get((), 0)
    if total == 0 or empty == total:
        return TAU
    if empty:
        rest = Counter({t: n for t, n in variants.items() if t})
        if threshold is not None and empty < threshold * total:
            return _mine(rest, threshold, depth)
        return Op(Kind.XOR, (TAU, _mine(rest, threshold, depth + 1)))

    d = build_dfg(variants)
    if len(d.activities) == 1:
        (a,) = d.activities
        if all(len(t) == 1 for t in variants):
            return Leaf(a)
        return Op(Kind.LOOP, (Leaf(a), TAU))

    fd = filter_dfg(d, threshold) if threshold else d
    cut = find_cut(fd)
    if cut is None and fd is not d:
        cut = find_cut(d)
    if cut is None:
        chunks = _tau_loop_split(variants, d) or _tau_loop_split(variants, fd) or _tau_loop_split(variants, fd, strict=False)
        if chunks is not None:
            return Op(Kind.LOOP, (_mine(chunks, threshold, depth + 1), TAU))
        log.debug("flower fall-through over %d activities", len(d.activities))
        return _flower(d.activities)
    stats = SplitStats()
    subs = split_log(variants, cut, stats)
    if stats.mixed_traces:
        log.debug("xor split: %d mixed traces assigned to majority part", stats.mixed_traces)
    return Op(cut.kind, tuple(_mine(s, threshold, depth + 1) for s in subs))


def discover(log) -> Tree:
    """Basic Inductive Miner; the result replays every trace of ``log``."""
    return normalize(_mine(to_variants(log), None))


def discover_infrequent(log, noise_threshold: float = 0.2) -> Tree:
    """Inductive Miner with infrequent-behaviour filtering of the DFG."""
    if not 0.0 <= noise_threshold <= 1.0:
        raise ValueError(f"noise threshold {noise_threshold} outside [0, 1]")
    if noise_threshold == 0.0:
        return discover(log)
    return normalize(_mine(to_variants(log), noise_threshold))
