"""DOT rendering of process trees (gateway style) and workflow nets."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .discovery import build_dfg, to_variants
from .petri import WorkflowNet
from .tree import Kind, Leaf, Op, Tau, Tree, leaves

GATEWAY = {Kind.AND: "+", Kind.XOR: "×", Kind.LOOP: "↻"}


@dataclass
class AnnotatedModel:
    tree: Tree
    activity_freq: Counter = field(default_factory=Counter)
    edge_freq: Counter = field(default_factory=Counter)
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        acts = set(leaves(self.tree))
        stray = [a for a in self.activity_freq if a not in acts]
        if stray:
            raise ValueError(f"annotated activities not in the tree: {sorted(stray)}")


def annotate(tree: Tree, log) -> AnnotatedModel:
    """Event counts per activity and directly-follows counts from ``log``.

    Activities of the log that the tree lacks are reported in ``warnings``
    and left out of the annotation.
    """
    acts = set(leaves(tree))
    variants = to_variants(log)
    freq: Counter = Counter({a: 0 for a in acts})
    missing: Counter = Counter()
    for trace, n in variants.items():
        for a in trace:
            if a in acts:
                freq[a] += n
            else:
                missing[a] += n
    dfg = build_dfg(variants)
    edges = Counter({e: n for e, n in dfg.edges.items() if e[0] in acts and e[1] in acts})
    warnings = [f"activity {a!r} ({n} events) does not occur in the model" for a, n in sorted(missing.items())]
    return AnnotatedModel(tree, freq, edges, warnings)


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


class _Dot:
    def __init__(self, name: str):
        self.lines = [f"digraph {name} {{", "  rankdir=LR;", '  node [fontname="Helvetica", fontsize=10];']
        self.count = 0

    def node(self, **attrs) -> str:
        nid = f"n{self.count}"
        self.count += 1
        self.lines.append(f"  {nid} [{self._attrs(attrs)}];")
        return nid

    def edge(self, a: str, b: str, **attrs) -> None:
        self.lines.append(f"  {a} -> {b}" + (f" [{self._attrs(attrs)}]" if attrs else "") + ";")

    @staticmethod
    def _attrs(attrs) -> str:
        return ", ".join(f"{k}={v if isinstance(v, (int, float)) else _quote(str(v))}" for k, v in attrs.items())

    def text(self) -> str:
        return "\n".join(self.lines + ["}"]) + "\n"


def to_dot(m: AnnotatedModel, name: str = "model") -> str:
    """Boxes for activities, diamonds for gateway splits and joins, a filled
    start circle and a double end circle. Edges between two activities carry
    their directly-follows count when it is known."""
    dot = _Dot(name)

    def diamond(kind: Kind) -> str:
        return dot.node(shape="diamond", label=GATEWAY[kind], width=0.3, height=0.3)

    def link(src, dst) -> None:
        (a_id, a_act), (b_id, b_act) = src, dst
        n = m.edge_freq.get((a_act, b_act)) if a_act and b_act else None
        if n:
            dot.edge(a_id, b_id, label=n)
        else:
            dot.edge(a_id, b_id)

    # returns (entry, exit), each a (node id, activity or None) pair
    def build(t: Tree):
        if isinstance(t, Leaf):
            nid = dot.node(shape="box", style="rounded", label=f"{t.label}\n({m.activity_freq.get(t.label, 0)})")
            return (nid, t.label), (nid, t.label)
        if isinstance(t, Tau):
            nid = dot.node(shape="square", style="filled", fillcolor="black", label="", width=0.12, height=0.12)
            return (nid, None), (nid, None)
        if t.kind is Kind.SEQ:
            parts = [build(c) for c in t.children]
            for (_, out), (inp, _) in zip(parts, parts[1:]):
                link(out, inp)
            return parts[0][0], parts[-1][1]
        split = (diamond(t.kind), None)
        parts = [build(c) for c in t.children]
        join = (diamond(t.kind), None)
        if t.kind is Kind.LOOP:
            # split is the loop entry, join decides between redo and exit
            body, redos = parts[0], parts[1:]
            link(split, body[0])
            link(body[1], join)
            for r in redos:
                link(join, r[0])
                link(r[1], split)
        else:
            for inp, out in parts:
                link(split, inp)
                link(out, join)
        return split, join

    start = dot.node(shape="circle", style="filled", fillcolor="black", label="", width=0.2)
    entry, exit_ = build(m.tree)
    end = dot.node(shape="doublecircle", label="", width=0.2)
    link((start, None), entry)
    link(exit_, (end, None))
    return dot.text()


def net_to_dot(net: WorkflowNet, name: str = "net") -> str:
    """Places as circles, labelled transitions as boxes, silent ones as black bars."""
    dot = _Dot(name)
    ids = {}
    for p in net.places:
        style = {"shape": "circle", "label": ""}
        if p == net.source:
            style.update(style="filled", fillcolor="black")
        elif p == net.sink:
            style["shape"] = "doublecircle"
        style["xlabel"] = p
        ids[p] = dot.node(**style)
    for t in net.transitions:
        if t.label is None:
            ids[t.name] = dot.node(shape="box", style="filled", fillcolor="black", label="", width=0.1, height=0.4)
        else:
            ids[t.name] = dot.node(shape="box", label=t.label)
    for a, b in net.arcs:
        dot.edge(ids[a], ids[b])
    return dot.text()
