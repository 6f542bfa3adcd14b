"""Process trees: block-structured models over ->, x, +, loop operators."""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Union


class Kind(enum.Enum):
    SEQ = ("→", "seq")
    XOR = ("×", "xor")
    AND = ("∧", "and")
    LOOP = ("⟲", "loop")

    @property
    def glyph(self) -> str:
        return self.value[0]

    @property
    def ascii(self) -> str:
        return self.value[1]


@dataclass(frozen=True)
class Leaf:
    label: str


@dataclass(frozen=True)
class Tau:
    pass


@dataclass(frozen=True)
class Op:
    """Operator node. For LOOP the first child is the body, the rest are redo branches."""

    kind: Kind
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise ValueError(f"{self.kind.name} operator needs at least one child")


Tree = Union[Leaf, Tau, Op]
TAU = Tau()


def seq(*c):
    return Op(Kind.SEQ, c)


def xor(*c):
    return Op(Kind.XOR, c)


def par(*c):
    return Op(Kind.AND, c)


def loop(*c):
    return Op(Kind.LOOP, c)


def leaves(t: Tree) -> list[str]:
    if isinstance(t, Leaf):
        return [t.label]
    if isinstance(t, Op):
        return [a for c in t.children for a in leaves(c)]
    return []


def operators(t: Tree) -> list[Op]:
    if isinstance(t, Op):
        return [t] + [o for c in t.children for o in operators(c)]
    return []


def is_valid(t: Tree) -> bool:
    """True when every operator has at least two children."""
    return all(len(o.children) >= 2 for o in operators(t))


# --- language ---------------------------------------------------------------

def _interleave(a: tuple, b: tuple) -> set[tuple]:
    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a):
            return {b[j:]}
        if j == len(b):
            return {a[i:]}
        return {(a[i],) + r for r in go(i + 1, j)} | {(b[j],) + r for r in go(i, j + 1)}

    return go(0, 0)


def _concat(xs: set, ys: set, max_len: int) -> set:
    return {x + y for x in xs for y in ys if len(x) + len(y) <= max_len}


def language(t: Tree, max_len: int, max_loop_unrollings: int) -> frozenset[tuple[str, ...]]:
    """All traces of length <= max_len, each loop taking at most
    ``max_loop_unrollings`` redo iterations."""
    if max_len < 0:
        raise ValueError("max_len must be >= 0")

    def lang(n) -> set:
        if isinstance(n, Leaf):
            return {(n.label,)} if max_len >= 1 else set()
        if isinstance(n, Tau):
            return {()}
        subs = [lang(c) for c in n.children]
        if n.kind is Kind.XOR:
            return set().union(*subs)
        if n.kind is Kind.SEQ:
            acc = {()}
            for s in subs:
                acc = _concat(acc, s, max_len)
            return acc
        if n.kind is Kind.AND:
            acc = {()}
            for s in subs:
                acc = {w for x in acc for y in s if len(x) + len(y) <= max_len for w in _interleave(x, y)}
            return acc
        body, redo = subs[0], set().union(*subs[1:]) if len(subs) > 1 else None
        if redo is None:
            return body
        acc = set(body)
        frontier = set(body)
        for _ in range(max_loop_unrollings):
            frontier = _concat(_concat(frontier, redo, max_len), body, max_len)
            if frontier <= acc:
                break
            acc |= frontier
        return acc

    return frozenset(lang(t))


# --- normalization ----------------------------------------------------------

def normalize(t: Tree) -> Tree:
    """Flatten nested SEQ/XOR/AND of the same kind and collapse unary operators."""
    if not isinstance(t, Op):
        return t
    kids = [normalize(c) for c in t.children]
    if t.kind is not Kind.LOOP:
        flat = []
        for c in kids:
            if isinstance(c, Op) and c.kind is t.kind:
                flat.extend(c.children)
            else:
                flat.append(c)
        kids = flat
    if len(kids) == 1:
        return kids[0]
    return Op(t.kind, tuple(kids))


# --- text format ------------------------------------------------------------

_BARE = re.compile(r"[A-Za-z0-9_.\-]+\Z")


def _quote(label: str) -> str:
    if _BARE.match(label) and label not in ("tau", "τ", "seq", "xor", "and", "loop"):
        return label
    return "'" + label.replace("\\", "\\\\").replace("'", "\\'") + "'"


def to_text(t: Tree, ascii: bool = False) -> str:
    """Canonical text, e.g. ``→(a, ∧(b, c))`` or ``seq(a, and(b, c))``."""
    if isinstance(t, Leaf):
        return _quote(t.label)
    if isinstance(t, Tau):
        return "tau" if ascii else "τ"
    name = t.kind.ascii if ascii else t.kind.glyph
    return name + "(" + ", ".join(to_text(c, ascii) for c in t.children) + ")"


class TreeSyntaxError(ValueError):
    pass


_OPS = {k.glyph: k for k in Kind} | {k.ascii: k for k in Kind} | {"+": Kind.AND, "->": Kind.SEQ, "*": Kind.LOOP}


def parse_tree(text: str) -> Tree:
    pos = 0
    n = len(text)

    def skip():
        nonlocal pos
        while pos < n and text[pos].isspace():
            pos += 1

    def err(msg):
        raise TreeSyntaxError(f"{msg} at offset {pos}")

    def atom() -> str:
        nonlocal pos
        skip()
        if pos < n and text[pos] == "'":
            pos += 1
            out = []
            while pos < n and text[pos] != "'":
                if text[pos] == "\\" and pos + 1 < n:
                    pos += 1
                out.append(text[pos])
                pos += 1
            if pos >= n:
                err("unterminated quoted label")
            pos += 1
            return "'" + "".join(out)
        start = pos
        while pos < n and text[pos] not in "(),'" and not text[pos].isspace():
            pos += 1
        if start == pos:
            err("expected a label or operator")
        return text[start:pos]

    def node() -> Tree:
        nonlocal pos
        tok = atom()
        if tok.startswith("'"):
            return Leaf(tok[1:])
        skip()
        if pos < n and text[pos] == "(":
            if tok not in _OPS:
                err(f"unknown operator {tok!r}")
            pos += 1
            kids = [node()]
            skip()
            while pos < n and text[pos] == ",":
                pos += 1
                kids.append(node())
                skip()
            if pos >= n or text[pos] != ")":
                err("expected ')'")
            pos += 1
            return Op(_OPS[tok], tuple(kids))
        if tok in ("tau", "τ"):
            return TAU
        return Leaf(tok)

    t = node()
    skip()
    if pos != n:
        err("trailing characters")
    return t
