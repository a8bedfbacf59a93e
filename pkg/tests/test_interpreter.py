import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ktsharp.harness import (corpus_entry, naive_eval, oracle_membership, random_crasp, random_formula,
                             strings_of_length)
from ktsharp.interpreter import (EmptyStringError, Evaluator, PositionError, StuckDecodeError,
                                 crasp_accepts, end_satisfies, end_satisfies_batch, eval_count,
                                 eval_formula, formula_vector, lm_assigns_nonzero,
                                 lm_greedy_decode, run_crasp)
from ktsharp.parsing import parse_lm
from ktsharp.syntax import ZERO, Atom, Count, Top, desugar, walk
from ktsharp.translator import crasp_to_kt


def test_atoms_and_top():
    assert eval_formula(Atom("a"), "aba", 1)
    assert not eval_formula(Atom("a"), "aba", 2)
    assert all(eval_formula(Top(), "xyz", i) for i in (1, 2, 3))


def test_counts():
    assert eval_count(Count(Atom("a")), "aba", 3) == 2
    assert [eval_count(Count(Top()), "abcd", i) for i in range(1, 5)] == [1, 2, 3, 4]
    assert eval_count(ZERO, "abc", 2) == 0


def test_dyck_formula(dyck):
    assert not eval_formula(dyck, "(()", 3)
    assert end_satisfies(dyck, "()")
    assert not end_satisfies(dyck, ")(")


def test_hello():
    f = corpus_entry("hello.kt").obj
    assert end_satisfies(f, "hello")
    for w in ("helo", "hlelo", "hellohello", "oellh"):
        assert not end_satisfies(f, w)


def test_position_and_empty_errors(dyck):
    with pytest.raises(EmptyStringError):
        end_satisfies(dyck, "")
    with pytest.raises(PositionError):
        eval_formula(Atom("a"), "ab", 3)
    with pytest.raises(PositionError):
        eval_formula(Atom("a"), "ab", 0)


def test_crasp_examples(dyck_program):
    trace = run_crasp(dyck_program, "(()")
    assert list(trace["C_open"]) == [1, 2, 2]
    assert list(run_crasp(dyck_program, "())(")["V"]) == [False, False, True, False]
    assert crasp_accepts(dyck_program, "()")
    assert not crasp_accepts(dyck_program, ")(")
    assert not crasp_accepts(dyck_program, "(()")


def test_lm_membership(dyck_lm):
    assert lm_assigns_nonzero(dyck_lm, "()")
    assert lm_assigns_nonzero(dyck_lm, "(())()")
    assert not lm_assigns_nonzero(dyck_lm, ")(")
    assert not lm_assigns_nonzero(dyck_lm, "($)")


def test_lm_agrees_with_dyck_oracle(dyck_lm):
    for n in range(1, 9):
        for w in strings_of_length("()", n):
            assert lm_assigns_nonzero(dyck_lm, w) == oracle_membership("dyck1", w)


def test_decode_runs_to_max_steps(dyck_lm):
    result = lm_greedy_decode(dyck_lm, "((", 6, ["(", ")", "$"])
    assert result.text == "((((((" and result.status == "max_steps"


def test_decode_stops_on_eos(dyck_lm):
    result = lm_greedy_decode(dyck_lm, "()", 6, ["$", "(", ")"])
    assert result.text == "()" and result.status == "eos"
    result = lm_greedy_decode(dyck_lm, "(", 64, ["$", ")", "("])
    assert result.text == "()" and result.status == "eos"


def test_decode_with_open_first_never_closes(dyck_lm):
    # "(" always wins when it is preferred, so the model never reaches EOS
    result = lm_greedy_decode(dyck_lm, "(", 10, [")", "(", "$"])
    assert result.status == "max_steps"


def test_decode_stuck():
    lm = parse_lm("alphabet: a\neos: $\nF(i) := !T\nT1(i) := T\nnext a := F\nnext EOS := F\n")
    with pytest.raises(StuckDecodeError):
        lm_greedy_decode(lm, "a", 5)


@given(st.integers(0, 2**32 - 1))
def test_vectorized_evaluator_matches_naive(seed):
    rng = random.Random(seed)
    f = random_formula(rng, ("a", "b"), depth=3, size=4)
    w = "".join(rng.choice("ab") for _ in range(rng.randint(1, 9)))
    vec = formula_vector(f, w)
    for i in range(1, len(w) + 1):
        assert bool(vec[i - 1]) == naive_eval(f, w, i)


@given(st.integers(0, 2**32 - 1))
def test_counts_are_monotone_prefix_sums(seed):
    rng = random.Random(seed)
    f = desugar(random_formula(rng, ("a", "b"), depth=2, size=4))
    ev = Evaluator(strings_of_length("ab", 6))
    for node in walk(f):
        if isinstance(node, Count):
            c = ev.count(node.body)
            steps = np.diff(np.concatenate([np.zeros((c.shape[0], 1), int), c], axis=1), axis=1)
            assert set(np.unique(steps)) <= {0, 1}
            assert (steps == ev.formula(node.body)).all()


@given(st.integers(0, 2**32 - 1))
def test_future_letters_do_not_change_the_past(seed):
    rng = random.Random(seed)
    f = random_formula(rng, ("a", "b"), depth=3, size=4)
    w = "".join(rng.choice("ab") for _ in range(6))
    v = "".join(rng.choice("ab") for _ in range(4))
    assert (formula_vector(f, w)[:6] == formula_vector(f, w + v)[:6]).all()


@given(st.integers(0, 2**32 - 1))
def test_program_and_translation_agree(seed):
    p = random_crasp(random.Random(seed), ("a", "b"))
    f = crasp_to_kt(p)
    words = strings_of_length("ab", 5)
    got = end_satisfies_batch(f, words)
    assert [crasp_accepts(p, w) for w in words] == list(got)
