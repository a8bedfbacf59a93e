import itertools

import random

import pytest
from hypothesis import given, strategies as st

from ktsharp.harness import random_formula, strings_of_length
from ktsharp.interpreter import Evaluator
from ktsharp.parsing import parse_kt
from ktsharp.syntax import (FALSE, ZERO, Add, And, Atom, Count, Leq, LiteralCapExceeded, Not,
                            One, Or, Top, desugar, linear_comparison, modal_depth,
                            normalize_comparison, num, pretty, to_canonical_dnf)

a, b = Atom("a"), Atom("b")


def test_constant_is_sum_of_ones():
    three = num(3)
    assert {type(n) for n in (three.left, three.right)} <= {Add, One}
    assert parse_kt("#[Q_a] <= 3").right == three


def test_zero_is_count_of_false():
    assert parse_kt("#[!T] <= 0") == Leq(ZERO, ZERO)
    assert ZERO == Count(Not(Top()))


def test_position_is_count_of_top():
    f = parse_kt("i <= 1")
    assert f.left == Count(Top())


def test_modal_depth(dyck):
    assert modal_depth(a) == 0
    assert modal_depth(parse_kt("#[Q_a] <= #[Q_b]")) == 1
    assert modal_depth(dyck) == 2
    assert modal_depth(parse_kt("#[Q_a & #[Q_b] >= 1] >= 1")) == 2


def test_linear_comparison_examples():
    lc = linear_comparison(parse_kt("#[Q_a] <= #[Q_b]"))
    assert dict((body, c) for c, body in lc.terms) == {b: 1, a: -1}
    assert lc.constant == 0

    lc = linear_comparison(parse_kt("#[Q_a] + 1 <= #[Q_b]"))
    assert dict((body, c) for c, body in lc.terms) == {b: 1, a: -1}
    assert lc.constant == -1

    lc = linear_comparison(parse_kt("#[Q_a & Q_b] - #[Q_a & Q_b] <= 1"))
    assert lc.terms == () and lc.constant == 1


def test_dnf_examples():
    x, y = Atom("x"), Atom("y")
    sk = to_canonical_dnf(And(x, y), [x, y])
    assert sk.clauses == (((0, True), (1, True)),)
    sk = to_canonical_dnf(Or(x, y), [x, y])
    assert set(sk.clauses) == {((0, True), (1, True)), ((0, True), (1, False)),
                               ((0, False), (1, True))}
    sk = to_canonical_dnf(Not(x), [x])
    assert sk.clauses == (((0, False),),)


def test_dnf_cap():
    leaves = [Atom(f"x{k}") for k in range(5)]
    f = leaves[0]
    for leaf in leaves[1:]:
        f = Or(f, leaf)
    with pytest.raises(LiteralCapExceeded):
        to_canonical_dnf(f, leaves, cap=4)


def _eval_bool(f, env):
    if isinstance(f, Top):
        return True
    if isinstance(f, Atom):
        return env[f.symbol]
    if isinstance(f, Not):
        return not _eval_bool(f.arg, env)
    if isinstance(f, And):
        return _eval_bool(f.left, env) and _eval_bool(f.right, env)
    return _eval_bool(f.left, env) or _eval_bool(f.right, env)


@st.composite
def boolean_exprs(draw, depth=4):
    names = ["x", "y", "z"]
    if depth == 0 or draw(st.booleans()):
        return draw(st.sampled_from([Atom(n) for n in names] + [Top()]))
    kind = draw(st.sampled_from(["not", "and", "or"]))
    if kind == "not":
        return Not(draw(boolean_exprs(depth - 1)))
    node = And if kind == "and" else Or
    return node(draw(boolean_exprs(depth - 1)), draw(boolean_exprs(depth - 1)))


@given(boolean_exprs())
def test_dnf_agrees_on_all_assignments(expr):
    leaves = [Atom("x"), Atom("y"), Atom("z")]
    sk = to_canonical_dnf(expr, leaves)
    for bits in itertools.product((False, True), repeat=3):
        env = dict(zip("xyz", bits))
        hits = sum(all(bits[k] == pos for k, pos in c) for c in sk.clauses)
        assert hits <= 1
        assert sk.evaluate(bits) == _eval_bool(expr, env)


@given(st.integers(0, 2**32 - 1))
def test_normalized_comparisons_are_equivalent(seed):
    rng = random.Random(seed)
    f = desugar(random_formula(rng, ("a", "b"), depth=2, size=3))
    g = normalize_comparison(f)
    assert modal_depth(g) <= modal_depth(f)  # cancelled terms may drop a level
    ev = Evaluator(strings_of_length("ab", 6))
    assert (ev.formula(f) == ev.formula(g)).all()


@given(st.integers(0, 2**32 - 1))
def test_desugar_preserves_meaning_and_depth(seed):
    rng = random.Random(seed)
    f = random_formula(rng, ("a", "b"), depth=2, size=3)
    core = desugar(f)
    assert modal_depth(core) == modal_depth(f)
    ev = Evaluator(strings_of_length("ab", 6))
    assert (ev.formula(f) == ev.formula(core)).all()


def test_pretty_uses_false_constant():
    assert "!T" in pretty(FALSE)
