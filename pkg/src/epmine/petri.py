"""Workflow nets, the tree-to-net translation and a reachability-based soundness check."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

from .tree import Kind, Leaf, Op, Tau, Tree


class InvalidNetError(ValueError):
    pass


class Transition(NamedTuple):
    name: str
    label: str | None  # None = silent


@dataclass(frozen=True)
class WorkflowNet:
    places: tuple[str, ...]
    transitions: tuple[Transition, ...]
    arcs: tuple[tuple[str, str], ...]
    source: str = "i"
    sink: str = "o"
    pre: dict = field(init=False, repr=False, compare=False)
    post: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pnames = set(self.places)
        tnames = {t.name for t in self.transitions}
        if len(pnames) != len(self.places) or len(tnames) != len(self.transitions) or pnames & tnames:
            raise InvalidNetError("node names must be unique")
        pre = {t.name: [] for t in self.transitions}
        post = {t.name: [] for t in self.transitions}
        for a, b in self.arcs:
            if a in pnames and b in tnames:
                pre[b].append(a)
            elif a in tnames and b in pnames:
                post[a].append(b)
            else:
                raise InvalidNetError(f"arc {a}->{b} must connect a place and a transition")
        if self.source not in pnames or self.sink not in pnames:
            raise InvalidNetError("source and sink must be places")
        if any(self.source in ps for ps in post.values()):
            raise InvalidNetError("source place has incoming arcs")
        if any(self.sink in ps for ps in pre.values()):
            raise InvalidNetError("sink place has outgoing arcs")
        object.__setattr__(self, "pre", {k: tuple(v) for k, v in pre.items()})
        object.__setattr__(self, "post", {k: tuple(v) for k, v in post.items()})
        self._check_paths(pnames, tnames)

    def _check_paths(self, pnames, tnames):
        fwd: dict = {n: [] for n in pnames | tnames}
        bwd: dict = {n: [] for n in pnames | tnames}
        for a, b in self.arcs:
            fwd[a].append(b)
            bwd[b].append(a)

        def reach(start, adj):
            seen = {start}
            stack = [start]
            while stack:
                for y in adj[stack.pop()]:
                    if y not in seen:
                        seen.add(y)
                        stack.append(y)
            return seen

        stray = (pnames | tnames) - (reach(self.source, fwd) & reach(self.sink, bwd))
        if stray:
            raise InvalidNetError(f"nodes not on a path from source to sink: {sorted(stray)}")

    @property
    def labels(self) -> dict[str, str | None]:
        return {t.name: t.label for t in self.transitions}


class _Builder:
    def __init__(self):
        self.places = ["i", "o"]
        self.transitions: list[Transition] = []
        self.arcs: list[tuple[str, str]] = []

    def place(self) -> str:
        p = f"p{len(self.places) - 1}"
        self.places.append(p)
        return p

    def trans(self, label, ins, outs) -> str:
        t = f"t{len(self.transitions)}"
        self.transitions.append(Transition(t, label))
        self.arcs.extend((p, t) for p in ins)
        self.arcs.extend((t, p) for p in outs)
        return t

    def build(self, t: Tree, entry: str, exit: str) -> None:
        if isinstance(t, Leaf):
            self.trans(t.label, [entry], [exit])
        elif isinstance(t, Tau):
            self.trans(None, [entry], [exit])
        elif t.kind is Kind.SEQ:
            cur = entry
            for i, c in enumerate(t.children):
                nxt = exit if i == len(t.children) - 1 else self.place()
                self.build(c, cur, nxt)
                cur = nxt
        elif t.kind is Kind.XOR:
            for c in t.children:
                self.build(c, entry, exit)
        elif t.kind is Kind.AND:
            starts = [self.place() for _ in t.children]
            ends = [self.place() for _ in t.children]
            self.trans(None, [entry], starts)
            for c, s, e in zip(t.children, starts, ends):
                self.build(c, s, e)
            self.trans(None, ends, [exit])
        else:
            body_in, body_out = self.place(), self.place()
            self.trans(None, [entry], [body_in])
            self.build(t.children[0], body_in, body_out)
            for redo in t.children[1:]:
                self.build(redo, body_out, body_in)
            self.trans(None, [body_out], [exit])


def tree_to_net(t: Tree) -> WorkflowNet:
    b = _Builder()
    b.build(t, "i", "o")
    return WorkflowNet(tuple(b.places), tuple(b.transitions), tuple(b.arcs))


# --- markings ------------------------------------------------------------------

Marking = tuple  # sorted tuple of (place, count) with count > 0


def marking(**counts: int) -> Marking:
    return tuple(sorted((p, n) for p, n in counts.items() if n))


def enabled(net: WorkflowNet, m: Marking, t: str) -> bool:
    d = dict(m)
    need: dict = {}
    for p in net.pre[t]:
        need[p] = need.get(p, 0) + 1
    return all(d.get(p, 0) >= n for p, n in need.items())


def fire(net: WorkflowNet, m: Marking, t: str) -> Marking:
    d = dict(m)
    for p in net.pre[t]:
        if not d.get(p):
            raise ValueError(f"transition {t} is not enabled in {d}")
        d[p] -= 1
    for p in net.post[t]:
        d[p] = d.get(p, 0) + 1
    return tuple(sorted((p, n) for p, n in d.items() if n))


class Soundness(NamedTuple):
    status: str  # "sound" | "unsound" | "inconclusive"
    reason: str
    markings: int


def reachability_graph(net: WorkflowNet, state_cap: int = 100_000):
    """BFS over markings from {i:1}; returns (edges, complete) where edges maps
    marking -> list of (transition, successor)."""
    m0 = marking(**{net.source: 1})
    graph = {m0: []}
    queue = deque([m0])
    tnames = [t.name for t in net.transitions]
    while queue:
        m = queue.popleft()
        for t in tnames:
            if enabled(net, m, t):
                m2 = fire(net, m, t)
                graph[m].append((t, m2))
                if m2 not in graph:
                    if len(graph) >= state_cap:
                        return graph, False
                    graph[m2] = []
                    queue.append(m2)
    return graph, True


def check_soundness(net: WorkflowNet, state_cap: int = 100_000) -> Soundness:
    graph, complete = reachability_graph(net, state_cap)
    if not complete:
        return Soundness("inconclusive", f"state cap {state_cap} reached", len(graph))
    final = marking(**{net.sink: 1})
    for m in graph:
        d = dict(m)
        if d.get(net.sink, 0) and m != final:
            return Soundness("unsound", f"improper completion: {dict(m)}", len(graph))
    rev: dict = {m: [] for m in graph}
    for m, succ in graph.items():
        for _, m2 in succ:
            rev[m2].append(m)
    back = {final} if final in graph else set()
    stack = list(back)
    while stack:
        for m in rev[stack.pop()]:
            if m not in back:
                back.add(m)
                stack.append(m)
    stuck = [m for m in graph if m not in back]
    if stuck:
        return Soundness("unsound", f"no option to complete from {dict(stuck[0])}", len(graph))
    fired = {t for succ in graph.values() for t, _ in succ}
    dead = [t.name for t in net.transitions if t.name not in fired]
    if dead:
        return Soundness("unsound", f"dead transitions: {dead}", len(graph))
    return Soundness("sound", "", len(graph))


def net_language(net: WorkflowNet, max_len: int, state_cap: int = 1_000_000) -> frozenset[tuple[str, ...]]:
    """Visible label sequences (length <= max_len) of firing sequences from {i:1} to {o:1}."""
    m0 = marking(**{net.source: 1})
    final = marking(**{net.sink: 1})
    seen = {(m0, ())}
    queue = deque(seen)
    out = set()
    while queue:
        m, w = queue.popleft()
        if m == final:
            out.add(w)
        for t in net.transitions:
            if not enabled(net, m, t.name):
                continue
            w2 = w if t.label is None else w + (t.label,)
            if len(w2) > max_len:
                continue
            s = (fire(net, m, t.name), w2)
            if s not in seen:
                if len(seen) >= state_cap:
                    raise RuntimeError("state cap reached while enumerating the net language")
                seen.add(s)
                queue.append(s)
    return frozenset(out)
