"""Token-based replay fitness and the cohort x unit fitness table."""
from __future__ import annotations

import csv
import io
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

from .log import EventLog, LogStats, log_stats
from .petri import WorkflowNet

METRIC = "token-based replay fitness"


class ReplayCounts(NamedTuple):
    produced: int = 0
    consumed: int = 0
    missing: int = 0
    remaining: int = 0

    def __add__(self, other):
        return ReplayCounts(*(a + b for a, b in zip(self, other)))

    def scaled(self, n: int) -> ReplayCounts:
        return ReplayCounts(*(a * n for a in self))


class Replayer:
    """Replays traces on one net, caching silent-transition searches per marking.

    Silent moves are found by breadth-first search over markings, capped at
    ``search_cap`` visited markings and a depth of 2x the transition count.
    Past the cap a goal-directed search takes over: it recursively enables
    the silent transitions feeding each missing input place.
    """

    def __init__(self, net: WorkflowNet, search_cap: int = 500):
        self.net = net
        self.search_cap = search_cap
        self.silent = [t.name for t in net.transitions if t.label is None]
        self.by_label: dict[str, list[str]] = {}
        for t in net.transitions:
            if t.label is not None:
                self.by_label.setdefault(t.label, []).append(t.name)
        self.need = {t: Counter(ps) for t, ps in net.pre.items()}
        self.feeders: dict[str, list[str]] = {}
        for t in self.silent:
            for q in net.post[t]:
                self.feeders.setdefault(q, []).append(t)
        self.depth_cap = 2 * len(net.transitions)
        self._relevant: dict = {}
        self._cache: dict = {}

    def _space(self, places: frozenset):
        """Search space for reaching ``places``: the silent transitions that can
        feed them and the places those transitions read."""
        hit = self._relevant.get(places)
        if hit is None:
            need = set(places)
            chosen = set()
            changed = True
            while changed:
                changed = False
                for t in self.silent:
                    if t not in chosen and any(p in need for p in self.net.post[t]):
                        chosen.add(t)
                        need.update(self.net.pre[t])
                        changed = True
            index = {p: i for i, p in enumerate(sorted(need))}
            moves = [
                (t, [index[p] for p in self.net.pre[t]], [index[p] for p in self.net.post[t] if p in index])
                for t in self.silent
                if t in chosen
            ]
            hit = (index, moves)
            self._relevant[places] = hit
        return hit

    def _enabled(self, m: dict, t: str) -> bool:
        return all(m.get(p, 0) >= n for p, n in self.need[t].items())

    def _fire(self, m: dict, t: str) -> None:
        for p in self.net.pre[t]:
            m[p] -= 1
            if not m[p]:
                del m[p]
        for p in self.net.post[t]:
            m[p] = m.get(p, 0) + 1

    def _bfs(self, start: tuple, goal, moves) -> list[str] | None | bool:
        """Shortest silent sequence over projected markings; False when the cap was hit."""
        parent = {start: None}
        queue = deque([(start, 0)])
        while queue:
            cur, depth = queue.popleft()
            if depth >= self.depth_cap:
                continue
            for t, ins, outs in moves:
                if not all(cur[i] for i in ins):
                    continue
                nxt = list(cur)
                for i in ins:
                    nxt[i] -= 1
                for i in outs:
                    nxt[i] += 1
                nf = tuple(nxt)
                if nf in parent:
                    continue
                parent[nf] = (cur, t)
                if goal(nf):
                    path = []
                    node = nf
                    while parent[node] is not None:
                        node, tt = parent[node]
                        path.append(tt)
                    return path[::-1]
                if len(parent) > self.search_cap:
                    return False
                queue.append((nf, depth + 1))
        return None

    def _produce(self, m: dict, place: str, busy: frozenset, fired: list[str]) -> bool:
        """Put a token into ``place`` by recursively enabling a feeding silent transition."""
        for t in self.feeders.get(place, ()):
            if t in busy:
                continue
            trial = dict(m)
            seq: list[str] = []
            if self._make_enabled(trial, t, busy | {t}, seq):
                self._fire(trial, t)
                seq.append(t)
                m.clear()
                m.update(trial)
                fired.extend(seq)
                return True
        return False

    def _make_enabled(self, m: dict, t: str, busy: frozenset, fired: list[str]) -> bool:
        if len(busy) > self.depth_cap:
            return False
        for p, n in self.need[t].items():
            while m.get(p, 0) < n:
                if not self._produce(m, p, busy, fired):
                    return False
        return True

    def _fallback(self, m: dict, targets: list[str], places: frozenset, exact_end: bool) -> list[str] | None:
        if targets:
            for t in targets:
                trial = dict(m)
                fired: list[str] = []
                if self._make_enabled(trial, t, frozenset(), fired):
                    return fired
            return None
        trial = dict(m)
        fired = []
        (sink,) = places
        if self._produce(trial, sink, frozenset(), fired) and (not exact_end or trial == {sink: 1}):
            return fired
        return None

    def _silent_path(self, m: dict, targets: list[str], places: frozenset, exact_end: bool = False):
        """Shortest silent sequence enabling one of ``targets`` (or marking the sink
        when ``targets`` is empty; with ``exact_end`` the sink must end up the only
        marked place)."""
        index, moves = self._space(places)
        if not moves:
            return None
        if exact_end and any(p not in index for p in m):
            return None
        state = [0] * len(index)
        for p, n in m.items():
            if p in index:
                state[index[p]] = n
        start = tuple(state)
        ck = (start, tuple(targets), exact_end)
        if ck in self._cache:
            return self._cache[ck]
        if targets:
            reqs = [[index[p] for p in self.net.pre[t]] for t in targets]

            def goal(st):
                return any(all(st[i] for i in r) for r in reqs)
        else:
            (sink,) = places
            si = index[sink]

            def goal(st):
                return st[si] == 1 and sum(st) == 1 if exact_end else st[si] > 0

        result = self._bfs(start, goal, moves)
        if result is False:
            result = self._fallback(m, targets, places, exact_end)
        self._cache[ck] = result
        return result

    def replay(self, trace: Sequence[str]) -> ReplayCounts:
        net = self.net
        m = {net.source: 1}
        p, c, miss = 1, 0, 0
        for label in trace:
            cands = self.by_label.get(label)
            if not cands:
                c += 1
                miss += 1
                continue
            chosen = next((t for t in cands if self._enabled(m, t)), None)
            if chosen is None:
                places = frozenset(q for t in cands for q in net.pre[t])
                path = self._silent_path(m, cands, places)
                if path is not None:
                    for t in path:
                        c += len(net.pre[t])
                        p += len(net.post[t])
                        self._fire(m, t)
                    chosen = next(t for t in cands if self._enabled(m, t))
            if chosen is None:
                chosen = cands[0]
                for q, n in self.need[chosen].items():
                    deficit = n - m.get(q, 0)
                    if deficit > 0:
                        miss += deficit
                        m[q] = m.get(q, 0) + deficit
            c += len(net.pre[chosen])
            p += len(net.post[chosen])
            self._fire(m, chosen)
        final = {net.sink: 1}
        if m != final:
            sink = frozenset([net.sink])
            path = self._silent_path(m, [], sink, exact_end=True)
            if path is None:
                path = self._silent_path(m, [], sink)
            for t in path or ():
                c += len(net.pre[t])
                p += len(net.post[t])
                self._fire(m, t)
        c += 1
        if m.get(net.sink, 0):
            m[net.sink] -= 1
        else:
            miss += 1
        return ReplayCounts(p, c, miss, sum(m.values()))


def replay_trace(net: WorkflowNet, trace: Sequence[str]) -> ReplayCounts:
    return Replayer(net).replay(tuple(trace))


def replay_log(net: WorkflowNet, log) -> ReplayCounts:
    """Summed counts over all traces (each distinct variant replayed once)."""
    from .discovery import to_variants

    r = Replayer(net)
    total = ReplayCounts()
    for variant, n in sorted(to_variants(log).items()):
        total = total + r.replay(variant).scaled(n)
    return total


def fitness_from_counts(rc: ReplayCounts) -> float:
    return 0.5 * (1 - rc.missing / rc.consumed) + 0.5 * (1 - rc.remaining / rc.produced)


def fitness(net: WorkflowNet, log) -> float:
    from .discovery import to_variants

    if sum(to_variants(log).values()) == 0:
        raise ValueError("fitness is undefined on an empty log")
    return fitness_from_counts(replay_log(net, log))


# --- report ---------------------------------------------------------------------

ALL_UNITS = 0  # scope key for the whole course
COHORTS = ("Pass", "Fail", "All")
_HEADERS = {"Pass": "Pass students", "Fail": "Fail students", "All": "All students"}


def scope_name(scope: int) -> str:
    return "All Units" if scope == ALL_UNITS else f"Unit {scope}"


@dataclass
class Cell:
    fitness: float
    counts: ReplayCounts
    stats: LogStats


@dataclass
class FitnessReport:
    """Fitness per (scope, cohort); scope 0 is "All Units", k >= 1 is "Unit k"."""

    cells: dict[tuple[int, str], Cell | None]
    variant: str = ""
    metric: str = METRIC
    scopes: list[int] = field(default_factory=list)
    cohorts: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.scopes:
            self.scopes = sorted({s for s, _ in self.cells})
        if not self.cohorts:
            present = {c for _, c in self.cells}
            self.cohorts = [c for c in COHORTS if c in present] + sorted(present - set(COHORTS))

    def value(self, scope: int, cohort: str) -> float | None:
        cell = self.cells.get((scope, cohort))
        return None if cell is None else cell.fitness

    def rows(self) -> list[list[str]]:
        out = [["Units"] + [_HEADERS.get(c, c) for c in self.cohorts]]
        for s in self.scopes:
            row = [scope_name(s)]
            for c in self.cohorts:
                v = self.value(s, c)
                row.append("-" if v is None else f"{v:.3f}")
            out.append(row)
        return out

    def _caption(self) -> str:
        return f"metric: {self.metric}" + (f"; miner: {self.variant}" if self.variant else "")

    def to_text(self) -> str:
        rows = self.rows()
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = []
        for r in rows:
            cells = [r[0].ljust(widths[0])] + [v.rjust(w) for v, w in zip(r[1:], widths[1:])]
            lines.append("  ".join(cells).rstrip())
        return "\n".join(lines) + "\n" + self._caption() + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerows(self.rows())
        return buf.getvalue()

    def to_markdown(self) -> str:
        rows = self.rows()
        lines = ["| " + " | ".join(rows[0]) + " |", "|" + "---|" + "---:|" * (len(rows[0]) - 1)]
        lines += ["| " + " | ".join(r) + " |" for r in rows[1:]]
        return "\n".join(lines) + "\n\n" + self._caption() + "\n"

    def render(self, fmt: str = "text") -> str:
        return {"text": self.to_text, "csv": self.to_csv, "md": self.to_markdown}[fmt]()


def fitness_cell(net: WorkflowNet, log: EventLog) -> Cell:
    rc = replay_log(net, log)
    return Cell(fitness_from_counts(rc), rc, log_stats(log))


def fitness_table(
    course: Mapping[tuple[int, str], tuple[WorkflowNet, EventLog] | None], variant: str = ""
) -> FitnessReport:
    """Fitness for every (scope, cohort) cell; None or empty logs render as absent."""
    cells = {}
    for key in sorted(course, key=lambda k: (k[0], COHORTS.index(k[1]) if k[1] in COHORTS else 99, k[1])):
        pair = course[key]
        if pair is None or not pair[1].traces:
            cells[key] = None
        else:
            cells[key] = fitness_cell(*pair)
    return FitnessReport(cells, variant)
