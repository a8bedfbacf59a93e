import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from ktsharp.compiler import compile_formula
from ktsharp.parsing import parse_kt
from ktsharp.runtime import (BOS, Block, ModelFormatError, TransformerModel, ZeroVarianceError,
                             block_forward, ffn, layer_norm, load_model, model_forward,
                             model_to_dict, save_model, self_attention, word_embed)


def _zero_block(d, hidden=2):
    return Block(np.zeros((1, d)), np.zeros((1, d)), np.eye(d),
                 [(np.zeros((hidden, d)), np.zeros(hidden)), (np.zeros((d, hidden)), np.zeros(d))])


def test_atom_embedding():
    m = compile_formula(parse_kt("Q_a"), ("a", "b"))
    A = word_embed(m, "ab")
    odd, even = m.pair("Q_a")
    assert (A[odd, 1], A[even, 1]) == (-1, 1)
    assert (A[odd, 2], A[even, 2]) == (1, -1)
    so, se = m.pair("<start>")
    assert (A[so, 0], A[se, 0]) == (-1, 1)
    assert (A[so, 1:] == 1).all() and (A[se, 1:] == -1).all()


def test_unknown_letter_is_rejected():
    m = compile_formula(parse_kt("Q_a"), ("a", "b"))
    with pytest.raises(ValueError, match="alphabet"):
        word_embed(m, "abc")


def test_uniform_attention_is_prefix_mean():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(4, 6))
    out = self_attention(_zero_block(4), A)
    for i in range(6):
        assert np.allclose(out[:, i], A[:, :i + 1].mean(axis=1))
    assert np.allclose(self_attention(_zero_block(4), A[:, :1]), A[:, :1])


def test_general_attention_matches_reference_softmax():
    rng = np.random.default_rng(1)
    d, n = 4, 5
    blk = Block(rng.normal(size=(2, d)), rng.normal(size=(2, d)), rng.normal(size=(d, d)),
                _zero_block(d).ffn)
    A = rng.normal(size=(d, n))
    out = self_attention(blk, A)
    Q, K, V = blk.W_Q @ A, blk.W_K @ A, blk.W_V @ A
    for i in range(n):
        s = np.array([Q[:, i] @ K[:, j] for j in range(i + 1)]) / np.sqrt(d)
        p = np.exp(s - s.max())
        assert np.allclose(out[:, i], V[:, :i + 1] @ (p / p.sum()))


@given(arrays(np.float64, (6, 5), elements=st.floats(-50, 50)), st.integers(0, 4))
def test_attention_ignores_the_future(A, cut):
    rng = np.random.default_rng(cut)
    blk = Block(rng.normal(size=(2, 6)), rng.normal(size=(2, 6)), rng.normal(size=(6, 6)),
                _zero_block(6).ffn)
    B = A.copy()
    B[:, cut + 1:] = rng.normal(size=B[:, cut + 1:].shape)
    assert np.allclose(self_attention(blk, A)[:, :cut + 1], self_attention(blk, B)[:, :cut + 1])


def test_layer_norm_of_balanced_column():
    col = np.array([[-3.0], [3.0], [3.0], [-3.0]])
    assert np.array_equal(layer_norm(col), col / 3)


@given(arrays(np.float64, (6, 3), elements=st.floats(-1e3, 1e3)))
def test_layer_norm_is_centered_and_scaled(A):
    centered = A - A.mean(axis=0)
    if (np.abs(centered).max(axis=0) < 1e-6).any():
        return
    out = layer_norm(A)
    assert np.allclose(out.mean(axis=0), 0, atol=1e-9)
    assert np.allclose((out ** 2).mean(axis=0), 1)


def test_layer_norm_zero_variance():
    with pytest.raises(ZeroVarianceError):
        layer_norm(np.ones((4, 2)))


def test_zero_ffn_is_identity_on_normalized_columns():
    A = np.array([[-1.0, 1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, -1.0]])
    blk = _zero_block(4)
    assert not ffn(blk, A).any()
    blk = Block(np.zeros((1, 4)), np.zeros((1, 4)), np.zeros((4, 4)), _zero_block(4).ffn)
    assert np.allclose(block_forward(blk, A), A)


def test_save_load_is_bitwise(tmp_path, dyck):
    m = compile_formula(dyck, ("(", ")"))
    path = tmp_path / "dyck.json"
    save_model(m, path)
    m2 = load_model(path)
    assert m2.dim_map == m.dim_map and m2.alphabet == m.alphabet and m2.output == m.output
    for s in m.alphabet + (BOS,):
        assert m.embedding[s].tobytes() == m2.embedding[s].tobytes()
    for b1, b2 in zip(m.blocks, m2.blocks):
        for x, y in [(b1.W_Q, b2.W_Q), (b1.W_K, b2.W_K), (b1.W_V, b2.W_V)]:
            assert x.tobytes() == y.tobytes()
        for (W1, c1), (W2, c2) in zip(b1.ffn, b2.ffn):
            assert W1.tobytes() == W2.tobytes() and c1.tobytes() == c2.tobytes()
    assert np.array_equal(model_forward(m, "(()())"), model_forward(m2, "(()())"))


def test_save_load_preserves_awkward_floats(tmp_path):
    d = 2
    emb = {"a": np.array([0.1, np.nextafter(1.0, 2.0)]), BOS: np.array([-1 / 3, 5e-324])}
    m = TransformerModel(("a",), d, emb, [])
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert back.embedding["a"].tobytes() == emb["a"].tobytes()
    assert back.embedding[BOS].tobytes() == emb[BOS].tobytes()


def test_truncated_file(tmp_path, dyck):
    m = compile_formula(dyck, ("(", ")"))
    path = tmp_path / "dyck.json"
    save_model(m, path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(ModelFormatError):
        load_model(path)


def test_malformed_fields(tmp_path):
    doc = model_to_dict(compile_formula(parse_kt("Q_a"), ("a", "b")))
    for broken in ({k: v for k, v in doc.items() if k != "embedding"},
                   {**doc, "d": 3},
                   {**doc, "embedding": {**doc["embedding"], "a": ["zz"]}}):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(broken))
        with pytest.raises(ModelFormatError):
            load_model(path)
