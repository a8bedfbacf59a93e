import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ktsharp.compiler import (CompilationError, compile_formula, identity_block,
                              parallel_compose, report)
from ktsharp.harness import all_strings, diff_test, random_core_formula, strings_of_length
from ktsharp.interpreter import formula_vector
from ktsharp.parsing import parse_kt
from ktsharp.runtime import (BOS, accepts, block_forward, ffn, forward_batch,
                             model_forward)
from ktsharp.syntax import modal_depth, pretty


def _signs(model, key, w):
    A = model_forward(model, w)
    o, e = model.pair(key)
    return A[e] > A[o]


def _with_bos(f, w):
    return np.concatenate([[False], formula_vector(f, w)])


def test_atom_compiles_to_embedding_only():
    m = compile_formula(parse_kt("Q_a"), ("a", "b"))
    assert m.blocks == []
    assert accepts(m, "ba") and not accepts(m, "ab")


def test_block_counts():
    assert len(compile_formula(parse_kt("#[Q_a] >= 1"), ("a", "b")).blocks) == 1
    assert len(compile_formula(parse_kt("3 <= 3"), ("a", "b")).blocks) == 0


def test_dyck_two_blocks_and_exhaustive_agreement(dyck):
    m = compile_formula(dyck, ("(", ")"))
    assert len(m.blocks) == 2
    rep = diff_test(dyck, m, list(all_strings("()", 8)), "dyck1")
    assert rep.ok and rep.counterexample is None
    assert rep.max_deviation < 1e-6


def test_depth0_combination_shares_one_pair():
    f = parse_kt("Q_a & !Q_b")
    m = compile_formula(f, ("a", "b", "c"))
    o, e = m.pair(pretty(f))
    assert (m.embedding["a"][o], m.embedding["a"][e]) == (-1, 1)
    for s in ("b", "c", BOS):
        assert (m.embedding[s][o], m.embedding[s][e]) == (1, -1)


def test_bos_column_is_false_except_start(dyck):
    m = compile_formula(dyck, ("(", ")"))
    col = m.embedding[BOS]
    for key, (odd, even, role) in m.dim_map.items():
        if role == "boolean":
            assert (col[odd - 1], col[even - 1]) == (1, -1)
    so, se = m.pair("<start>")
    assert (col[so], col[se]) == (-1, 1)
    for s in m.alphabet:
        assert (m.embedding[s][so], m.embedding[s][se]) == (1, -1)


def test_count_pair_over_reference_is_the_count():
    m = compile_formula(parse_kt("#[Q_a] >= 1"), ("a", "b"))
    _, traces = model_forward(m, "aab", trace=True)
    pre = traces[1]["pre_ln1"]
    co, ce = m.pair("#[Q_a]@1")
    ro, re = m.pair("<ref>")
    assert np.allclose(pre[re], 2 / np.arange(1, 5))
    assert np.allclose(pre[ro], -2 / np.arange(1, 5))
    assert np.allclose(pre[ce] / pre[re], [0, 1, 2, 2])
    assert (pre[co, 0], pre[ce, 0]) == (0, 0)
    assert np.allclose(pre[:, 3][[co, ce]], [-1.0, 1.0])  # 2 * C / (i + 1) at i = 3


def test_comparison_decision():
    f = parse_kt("#[Q_(] >= #[Q_)]")
    m = compile_formula(f, ("(", ")"))
    assert list(_signs(m, pretty(f), "())")[1:]) == [True, True, False]


def test_thresholded_columns_have_equal_magnitudes(dyck):
    m = compile_formula(dyck, ("(", ")"))
    for w in ("(()())", ")()(", "(((((("):
        _, traces = model_forward(m, w, trace=True)
        for k in range(1, len(m.blocks) + 1):
            mags = np.abs(traces[k]["pre_ln2"])
            assert np.allclose(mags, mags[:1], rtol=1e-9, atol=0)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_block_count_equals_modal_depth(seed):
    rng = random.Random(seed)
    f = random_core_formula(rng, ("a", "b"), rng.randint(0, 3))
    assert len(compile_formula(f, ("a", "b")).blocks) == modal_depth(f)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_compiled_fuzzed_formulas_agree(seed):
    rng = random.Random(seed)
    f = random_core_formula(rng, ("a", "b"), rng.randint(1, 3))
    m = compile_formula(f, ("a", "b"))
    rep = diff_test(f, m, list(all_strings("ab", 6)))
    assert rep.ok, rep.counterexample


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.lists(st.floats(0.05, 20), min_size=7, max_size=7))
def test_decisions_survive_column_rescaling(seed, factors):
    rng = random.Random(seed)
    f = random_core_formula(rng, ("a", "b"), rng.randint(1, 2))
    m = compile_formula(f, ("a", "b"))
    w = "".join(rng.choice("ab") for _ in range(6))
    _, traces = model_forward(m, w, trace=True)
    for k, block in enumerate(m.blocks, start=1):
        post = traces[k]["post_ln1"] * np.array(factors)
        out = ffn(block, post) + post
        assert np.array_equal(np.sign(out), np.sign(traces[k]["pre_ln2"]))


def test_corrupted_weight_gives_counterexample(dyck):
    m = compile_formula(dyck, ("(", ")"))
    W, _ = m.blocks[0].ffn[-1]
    W[:] = 0.0
    rep = diff_test(dyck, m, list(all_strings("()", 6)), "corrupted")
    assert not rep.ok
    assert rep.counterexample is not None
    assert rep.counterexample["string"] in rep.failing_strings


def test_unknown_letter_and_dimension_cap():
    with pytest.raises(CompilationError):
        compile_formula(parse_kt("Q_c"), ("a", "b"))
    with pytest.raises(CompilationError, match="dimensions"):
        compile_formula(parse_kt("#[Q_a] <= #[Q_b]"), ("a", "b"), max_dims=8)


def test_forward_batch_matches_single():
    f = parse_kt("#[Q_a & #[Q_b] >= 1] >= 1")
    m = compile_formula(f, ("a", "b"))
    words = strings_of_length("ab", 5)
    batch = forward_batch(m, words)
    for w, A in zip(words, batch):
        assert np.allclose(A, model_forward(m, w))


def test_parallel_compose_matches_conjunction_parts():
    qa, qb = parse_kt("Q_a"), parse_kt("Q_b")
    m = parallel_compose(compile_formula(qa, ("a", "b")), compile_formula(qb, ("a", "b")))
    both = compile_formula(parse_kt("Q_a & Q_b"), ("a", "b"))
    assert m.d == 2 * compile_formula(qa, ("a", "b")).d
    for w in all_strings("ab", 4):
        assert (_signs(m, "1:Q_a", w) == _signs(both, "Q_a", w)).all()
        assert (_signs(m, "2:Q_b", w) == _signs(both, "Q_b", w)).all()


def test_parallel_compose_pads_shallow_model(dyck):
    deep = compile_formula(dyck, ("(", ")"))
    shallow = compile_formula(parse_kt("Q_("), ("(", ")"))
    m = parallel_compose(deep, shallow)
    assert len(m.blocks) == 2 and m.d == deep.d + shallow.d
    for w in all_strings("()", 6):
        assert (_signs(m, "1:" + pretty(dyck), w) == _with_bos(dyck, w)).all()
        assert (_signs(m, "2:Q_(", w) == _with_bos(parse_kt("Q_("), w)).all()


def test_parallel_compose_alphabet_mismatch():
    with pytest.raises(CompilationError):
        parallel_compose(compile_formula(parse_kt("Q_a"), ("a",)),
                         compile_formula(parse_kt("Q_a"), ("a", "b")))


def test_identity_block_preserves_normalized_stream():
    m = compile_formula(parse_kt("Q_a & !Q_b"), ("a", "b"))
    A = model_forward(m, "abba")
    assert np.allclose(block_forward(identity_block(m.d), A), A)


def test_report_lists_strata(dyck):
    text = report(dyck, ("(", ")"))
    assert "blocks: 2" in text
    assert "depth 2 (block 2)" in text
