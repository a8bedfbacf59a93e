import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ktsharp.compiler import build_bos_reset, build_boolean_ffn, plan
from ktsharp.gadgets import (Stage, add_gtz, and_minmax, apply_ffn, build_arith_ffn,
                             build_minmax_ffn, fuse, gadget_max, gadget_min, gtz, gtz_relu,
                             not_pair)
from ktsharp.parsing import parse_kt

D = 8  # three pairs of interest plus a spare
X, Y, T = (0, 1), (2, 3), (4, 5)


def _stream(*pairs):
    z = np.zeros(D)
    for (o, e), v in zip((X, Y, T), pairs):
        z[o], z[e] = -v, v
    return z


def test_gtz_breakpoints():
    for n in (1, 2, 5, 9):
        step = 1 / (n + 1)
        assert gtz(1 * step, step) == pytest.approx(0.5 * step)
        assert gtz(0.0, step) == pytest.approx(-0.5 * step)
        assert gtz(0.5 * step, step) == 0.0


@given(st.floats(-20, 20), st.floats(0.01, 5))
def test_gtz_relu_form(x, r):
    assert gtz_relu(x, r) == pytest.approx(float(gtz(x, r)), abs=1e-9)
    assert -0.5 * r - 1e-12 <= gtz_relu(x, r) <= 0.5 * r + 1e-12


@given(st.integers(-30, 30), st.integers(1, 60))
def test_gtz_on_integers_is_a_sign(k, n):
    step = 1 / (n + 1)
    g = gtz(k * step, step)
    assert g == pytest.approx(0.5 * step if k >= 1 else -0.5 * step)


def test_min_max():
    assert gadget_max(-1.0, 2.0) == 2.0
    assert gadget_min(3.0, 5.0) == 3.0
    assert gadget_min(5.0, 3.0) == 3.0


def test_min_of_scaled_counts():
    for n in (1, 4, 10):
        z = _stream(3 / (n + 1), 5 / (n + 1))
        out = z + apply_ffn(build_minmax_ffn(D, X, Y, T, "min"), z)
        assert out[T[1]] == pytest.approx(3 / (n + 1))
        assert out[T[0]] == pytest.approx(-3 / (n + 1))


@given(st.floats(-10, 10), st.floats(-10, 10), st.sampled_from(["min", "max", "+", "-"]))
def test_pair_arithmetic(a, b, op):
    z = _stream(a, b, 7.0)
    if op in ("min", "max"):
        out = z + apply_ffn(build_minmax_ffn(D, X, Y, T, op), z)
        want = min(a, b) if op == "min" else max(a, b)
    else:
        out = z + apply_ffn(build_arith_ffn(D, X, Y, T, op), z)
        want = a + b if op == "+" else a - b
    assert out[T[1]] == pytest.approx(want, abs=1e-9)
    assert out[T[0]] == pytest.approx(-want, abs=1e-9)
    assert np.allclose(out[:4], z[:4])


def test_add_pairs():
    z = _stream(2.0, 3.0)
    out = z + apply_ffn(build_arith_ffn(D, X, Y, T, "+"), z)
    assert (out[T[0]], out[T[1]]) == (-5.0, 5.0)


def test_not_swaps_components():
    z = _stream(1.0)
    out = z + apply_ffn(not_pair(X[0], X[1], T, D), z)
    assert (out[T[0]], out[T[1]]) == (1.0, -1.0)


def test_and_truth_table():
    for a, b in itertools.product((-1.0, 1.0), repeat=2):
        z = _stream(a, b)
        out = z + apply_ffn(and_minmax(D, X, Y, T), z)
        want = 1.0 if a > 0 and b > 0 else -1.0
        assert (out[T[0]], out[T[1]]) == (-want, want)


def test_fused_stages_compose():
    rng = np.random.default_rng(0)
    s1, s2 = Stage(3, 3), Stage(3, 2)
    for k in range(3):
        s1.linear(k, {k: 1.0})
    s1.add(0, s1.unit({1: 1.0, 2: -1.0}), 2.0)
    s2.add(0, s2.unit({0: 1.0}), 1.0)
    s2.linear(1, {1: -1.0, 2: 3.0})
    for _ in range(20):
        z = rng.normal(size=3)
        assert np.allclose(apply_ffn(fuse([s1, s2]), z), s2(s1(z)))


def test_gtz_stage_in_units_of_reference():
    st_ = Stage(4, 2)
    u, r = {0: 1.0}, {1: 1.0}
    add_gtz(st_, 0, 1, u, r)
    for x, want in [(-2.0, -0.25), (0.0, -0.25), (0.5, 0.0), (1.0, 0.25), (3.0, 0.25)]:
        out = st_(np.array([x * 0.5, 0.5, 0.0, 0.0]))
        assert np.allclose(out, [-want, want])


# -- compiler stages in isolation ---------------------------------------------------------

def _column(p, values, start=False, ref=1.0):
    """A post-LN-like column: Boolean pairs from ``values``, reference ``(-2ref, 2ref)``."""
    z = np.zeros(p.d)
    z[0], z[1] = (-1.0, 1.0) if start else (1.0, -1.0)
    z[2], z[3] = -2 * ref, 2 * ref
    for node, pair in p.pairs.items():
        v = values.get(node, False)
        z[2 * pair], z[2 * pair + 1] = (-1.0, 1.0) if v else (1.0, -1.0)
    return z


def test_canonical_dnf_stage_for_three_way_or():
    f = parse_kt("#[Q_a] >= 1 | #[Q_b] >= 1 | #[Q_c] >= 1")
    p = plan(f, ("a", "b", "c"))
    stratum = p.strata[0]
    target, skel = stratum.skeletons[-1]
    assert len(skel.literals) == 3
    stage = build_boolean_ffn(p, stratum)
    for bits in itertools.product((False, True), repeat=3):
        # after thresholding every pair, the reference included, holds +-h with h = 1
        col = _column(p, dict(zip(skel.literals, bits)), ref=0.5)
        out = stage(np.concatenate([col, col]))
        o, e = 2 * p.pairs[target], 2 * p.pairs[target] + 1
        want = any(bits)
        assert (out[e] > 0) == want and (out[o] < 0) == want
        assert abs(out[e]) == pytest.approx(1.0)


def test_bos_reset():
    f = parse_kt("#[Q_a] >= 1")
    p = plan(f, ("a", "b"))
    target = p.pairs[p.formula]
    stage = build_bos_reset(p, [target])
    o, e = 2 * target, 2 * target + 1

    def apply(col):
        return col + stage(np.concatenate([col, col]))

    bos = _column(p, {p.formula: True}, start=True)
    once = apply(bos)
    assert (once[o], once[e]) == (1.0, -1.0)
    assert np.array_equal(apply(once), once)
    inner = _column(p, {p.formula: True}, start=False)
    assert np.array_equal(apply(inner), inner)
    inner_false = _column(p, {}, start=False)
    assert np.array_equal(apply(inner_false), inner_false)
