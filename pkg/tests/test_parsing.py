import random

import pytest
from hypothesis import given, strategies as st

from ktsharp.harness import load_corpus, random_crasp, random_formula
from ktsharp.parsing import (KtSyntaxError, format_crasp, format_kt, format_lm, load, parse_crasp,
                             parse_foc, parse_kt, parse_kt_file, parse_lm)
from ktsharp.syntax import ZERO, And, Atom, Count, Leq, Not, num, pretty


def test_comparison_of_counts():
    assert parse_kt("#[Q_a] <= #[Q_b]") == Leq(Count(Atom("a")), Count(Atom("b")))


def test_false_count_is_zero():
    assert parse_kt("#[!T] <= #[!T]") == Leq(ZERO, ZERO)


def test_equality_is_two_inequalities():
    c = Count(Atom("a"))
    assert parse_kt("#[Q_a] = 3") == And(Leq(c, num(3)), Leq(num(3), c))


def test_strict_and_reversed_relations():
    ca, cb = Count(Atom("a")), Count(Atom("b"))
    assert parse_kt("#[Q_a] < #[Q_b]") == Not(Leq(cb, ca))
    assert parse_kt("#[Q_a] > #[Q_b]") == Not(Leq(ca, cb))
    assert parse_kt("#[Q_a] >= #[Q_b]") == Leq(cb, ca)


def test_chained_comparison_is_pairwise_conjunction():
    chained = parse_kt("1 <= #[Q_a] <= #[Q_b]")
    assert chained == And(Leq(num(1), Count(Atom("a"))), Leq(Count(Atom("a")), Count(Atom("b"))))


@pytest.mark.parametrize("text, column", [
    ("#[Q_a <= 1", 7),
    ("Q_a & ", 7),
    ("#[Q_a] <=", 10),
    ("Q_a Q_b", 5),
])
def test_syntax_errors_report_position(text, column):
    with pytest.raises(KtSyntaxError) as err:
        parse_kt(text)
    assert err.value.line == 1
    assert err.value.column == column


def test_unknown_letter():
    with pytest.raises(KtSyntaxError, match="unknown letter"):
        parse_kt("Q_c", ("a", "b"))


def test_dyck_program_has_seven_ops(dyck_program):
    assert len(dyck_program.ops) == 7
    assert dyck_program.ops[-1][0] == "D"


@pytest.mark.parametrize("text, message", [
    ("alphabet: a b\nC1(i) := #[j <= i] Q_a(j)\n", "Boolean"),
    ("alphabet: a b\nP(i) := C1(i) <= C2(i)\n", "before definition"),
    ("alphabet: a b\nP(i) := Q_a(i)\nP(i) := Q_b(i)\n", "duplicate"),
])
def test_program_errors(text, message):
    with pytest.raises(KtSyntaxError, match=message):
        parse_crasp(text)


def test_corpus_files_round_trip():
    for entry in load_corpus():
        text = open(entry.path, encoding="utf-8").read()
        if entry.kind == "kt":
            alphabet, f = parse_kt_file(text)
            assert parse_kt_file(format_kt(alphabet, f)) == (alphabet, f)
        elif entry.kind == "crasp":
            p = parse_crasp(text)
            assert parse_crasp(format_crasp(p)) == p
        elif entry.kind == "lm":
            lm = parse_lm(text)
            assert parse_lm(format_lm(lm)) == lm


def test_load_rejects_unknown_suffix(tmp_path):
    path = tmp_path / "x.txt"
    path.write_text("Q_a\n")
    with pytest.raises(ValueError, match="unknown file type"):
        load(path)


def test_foc_file(corpus):
    nf = parse_foc((corpus / "majority_balance.foc").read_text())
    assert [v for v, _ in nf.counted] == ["x", "y"]
    assert len(nf.constraints) == 2  # x = y as two inequalities


@given(st.integers(0, 2**32 - 1))
def test_pretty_round_trip(seed):
    f = random_formula(random.Random(seed), ("a", "b", "c"), depth=3, size=4)
    assert parse_kt(pretty(f), ("a", "b", "c"), sugar=True) == f
    core = parse_kt(pretty(f), ("a", "b", "c"))
    assert parse_kt(pretty(core), ("a", "b", "c")) == core


def test_pretty_round_trip_thousand_formulas():
    rng = random.Random(2024)
    for _ in range(1000):
        f = random_formula(rng, ("a", "b"), depth=3, size=5)
        assert parse_kt(pretty(f), ("a", "b"), sugar=True) == f


@given(st.integers(0, 2**32 - 1))
def test_program_round_trip(seed):
    p = random_crasp(random.Random(seed), ("a", "b"))
    assert parse_crasp(format_crasp(p)) == p
