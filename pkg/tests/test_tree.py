import random

import pytest
from hypothesis import given, settings, strategies as st

from epmine.tree import (
    TAU, Kind, Leaf, Op, TreeSyntaxError, is_valid, language, leaves, loop, normalize, par, parse_tree, seq,
    to_text, xor,
)
from treegen import random_tree

a, b, c, d = (Leaf(x) for x in "abcd")


def test_language_of_operators():
    assert language(seq(a, b), 5, 1) == {("a", "b")}
    assert language(xor(a, b), 5, 1) == {("a",), ("b",)}
    assert language(par(a, b), 5, 1) == {("a", "b"), ("b", "a")}
    assert language(xor(a, TAU), 5, 1) == {("a",), ()}


def test_loop_language_counts_redo_iterations():
    assert language(loop(a, b), 9, 0) == {("a",)}
    assert language(loop(a, b), 9, 2) == {("a",), ("a", "b", "a"), ("a", "b", "a", "b", "a")}
    assert language(loop(a, TAU), 9, 2) == {("a",), ("a", "a"), ("a", "a", "a")}


def test_language_truncates_at_max_len():
    assert language(seq(a, b, c), 2, 1) == frozenset()
    assert language(xor(a, seq(b, c)), 1, 1) == {("a",)}
    with pytest.raises(ValueError):
        language(a, -1, 1)


def test_parallel_language_size_is_binomial():
    # interleavings of <a,b> and <c,d> keep each side's order: C(4,2) = 6
    assert len(language(par(seq(a, b), seq(c, d)), 4, 0)) == 6


def test_normalize_flattens_and_collapses():
    assert normalize(seq(a, seq(b, c))) == seq(a, b, c)
    assert normalize(Op(Kind.XOR, (a,))) == a
    assert normalize(xor(a, xor(b, par(c, d)))) == xor(a, b, par(c, d))
    # loops keep their nesting: a nested loop is not the same as one flat loop
    nested = loop(loop(a, b), c)
    assert normalize(nested) == nested


def test_text_round_trip_and_aliases():
    t = seq(a, par(b, loop(c, TAU)), xor(d, TAU))
    assert to_text(t) == "→(a, ∧(b, ⟲(c, τ)), ×(d, τ))"
    assert to_text(t, ascii=True) == "seq(a, and(b, loop(c, tau)), xor(d, tau))"
    assert parse_tree(to_text(t)) == t
    assert parse_tree(to_text(t, ascii=True)) == t
    assert parse_tree("->(a, +(b, *(c, tau)), xor(d, tau))") == t


def test_labels_with_spaces_are_quoted():
    t = seq(Leaf("LEARNING|page view"), Leaf("it's"))
    text = to_text(t)
    assert "'LEARNING|page view'" in text
    assert parse_tree(text) == t


@pytest.mark.parametrize("bad", ["", "seq(a,", "foo(a)", "seq(a) b", "'open", "seq(,)"])
def test_parse_errors(bad):
    with pytest.raises(TreeSyntaxError):
        parse_tree(bad)


def test_operator_needs_children():
    with pytest.raises(ValueError):
        Op(Kind.SEQ, ())


def test_leaves_and_validity():
    t = seq(a, xor(b, TAU), loop(c, d))
    assert leaves(t) == ["a", "b", "c", "d"]
    assert is_valid(t)
    assert not is_valid(Op(Kind.SEQ, (a,)))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 8))
def test_text_round_trip_random(seed, n):
    t = random_tree(random.Random(seed), n)
    assert parse_tree(to_text(t)) == t
    assert parse_tree(to_text(t, ascii=True)) == t


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 6))
def test_normalize_preserves_language(seed, n):
    rng = random.Random(seed)
    t = random_tree(rng, n)
    # wrap in redundant operators, which normalize must remove
    wrapped = Op(Kind.SEQ, (Op(Kind.XOR, (t,)),))
    assert normalize(wrapped) == normalize(t)
    assert language(normalize(wrapped), 6, 1) == language(t, 6, 1)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 6))
def test_language_monotone_in_bounds(seed, n):
    t = random_tree(random.Random(seed), n)
    small, big = language(t, 4, 1), language(t, 6, 2)
    assert small <= big
    assert {w for w in big if len(w) <= 4} >= small
