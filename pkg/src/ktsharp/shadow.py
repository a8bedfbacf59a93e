"""Exact replay of a compiled model's forward pass in integer arithmetic.

Weights of compiled models are dyadic rationals, so each matrix is stored as
an integer matrix times ``2**-k``.  Block inputs must be rational (they are
``+-1`` for compiled models).  Inside a block every column is carried as an
integer vector times a positive per-column factor.  That factor is never
needed explicitly: LayerNorm removes it, and the FFN has no biases, so it
commutes with positive scaling.  Only the pre-LayerNorm attention sums and
the final LayerNorm need actual values; the latter is rational exactly when
``d * sum(centered**2)`` is a perfect square.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .runtime import TransformerModel, model_forward, word_embed

_LIMIT = 2 ** 62


class NonUniformAttentionError(ValueError):
    """The shadow only replays attention with all-zero scores."""


class IrrationalColumnError(ArithmeticError):
    """A LayerNorm output is irrational, so it cannot feed the next exact block."""


def dyadic(W: np.ndarray, max_shift: int = 60) -> tuple[np.ndarray, int]:
    """``(M, k)`` with integer ``M`` and ``W == M / 2**k``."""
    W = np.asarray(W, dtype=np.float64)
    for k in range(max_shift + 1):
        scaled = W * (2.0 ** k)
        if np.all(scaled == np.round(scaled)):
            return scaled.astype(np.int64), k
    raise ValueError("weights are not dyadic rationals")


def _matmul(W: np.ndarray, X: np.ndarray) -> np.ndarray:
    bound = (np.abs(W).sum(axis=1).max(initial=0)) * (np.abs(X).max(initial=0))
    if bound >= _LIMIT:
        raise OverflowError("exact replay would overflow 64-bit integers")
    return W @ X


def _center(X: np.ndarray) -> np.ndarray:
    """``d * x - sum(x)`` per column: centered and scaled by ``d``."""
    d = X.shape[0]
    return d * X - X.sum(axis=0, keepdims=True)


@dataclass
class BlockShadow:
    pre_ln1_num: np.ndarray  # integer numerators
    pre_ln1_den: np.ndarray  # per-column positive denominators
    pre_ln2: np.ndarray  # integer vector per column, up to a positive factor
    post_ln2_num: np.ndarray
    post_ln2_den: np.ndarray
    count_ratios: dict = field(default_factory=dict)  # key -> ratio numerators (ints)
    ratio_exact: dict = field(default_factory=dict)  # key -> bool: ratio is an integer
    gtz_exact: bool = False
    max_pre_ln1_error: float = 0.0

    def pre_ln1_float(self) -> np.ndarray:
        return self.pre_ln1_num / self.pre_ln1_den


@dataclass
class ShadowResult:
    blocks: list
    output_num: np.ndarray
    output_den: int

    @property
    def max_pre_ln1_error(self) -> float:
        return max((b.max_pre_ln1_error for b in self.blocks), default=0.0)

    @property
    def gtz_exact(self) -> bool:
        return all(b.gtz_exact for b in self.blocks)


def _rational_input(A: np.ndarray) -> tuple[np.ndarray, int]:
    M, k = dyadic(A)
    return M, 2 ** k


def rational_shadow_forward(model: TransformerModel, w: str, *, compare_floats: bool = True
                            ) -> ShadowResult:
    """Replay ``model`` on ``w`` exactly and certify the float run against it."""
    for b in model.blocks:
        if b.W_Q.any() and b.W_K.any():
            raise NonUniformAttentionError("attention scores are not identically zero")
    A = word_embed(model, w)
    M, D = _rational_input(A)  # block input = M / D
    floats = model_forward(model, w, trace=True)[1] if compare_floats else None
    ref_o, ref_e = model.pair("<ref>") if "<ref>" in model.dim_map else (None, None)
    counts = [(k, model.pair(k)) for k, (_, _, role) in model.dim_map.items() if role == "count"]
    results = []
    N_cols = M.shape[1]
    positions = np.arange(1, N_cols + 1, dtype=np.int64)  # i + 1
    for index, block in enumerate(model.blocks, start=1):
        WV, kv = dyadic(block.W_V)
        V = _matmul(WV, M)
        # pre-LN1 = cumsum(V)/(positions * 2^kv * D) + M/D
        num = np.cumsum(V, axis=1) + (2 ** kv) * positions * M
        if np.abs(num).max(initial=0) >= _LIMIT:
            raise OverflowError("exact replay would overflow 64-bit integers")
        den = positions * (2 ** kv) * D
        shadow = BlockShadow(num, den, None, None, None)
        if ref_o is not None:
            ref = num[ref_e] - num[ref_o]
            for key, (co, ce) in counts:
                if not key.endswith(f"@{index}"):
                    continue
                cnt = num[ce] - num[co]
                shadow.ratio_exact[key] = bool(np.all(cnt % ref == 0))
                shadow.count_ratios[key] = cnt // ref
        if floats is not None:
            exact = num / den
            shadow.max_pre_ln1_error = float(np.abs(floats[index]["pre_ln1"] - exact).max())
        # LN1 is invariant to per-column positive scale: feed centered numerators
        X = _center(num)
        K = 0
        h = X
        for k, (W, b) in enumerate(block.ffn):
            if np.any(b != 0):
                raise ValueError("exact replay needs bias-free FFNs")
            Wi, kw = dyadic(W)
            h = _matmul(Wi, h)
            K += kw
            if k < len(block.ffn) - 1:
                h = np.maximum(h, 0)
        if abs(K) > 60:
            raise OverflowError("FFN weight denominators are too large")
        pre2 = h + (2 ** K) * X
        if np.abs(pre2).max(initial=0) >= _LIMIT:
            raise OverflowError("exact replay would overflow 64-bit integers")
        shadow.pre_ln2 = pre2
        if ref_o is not None:
            # every coordinate equals the half step r/2, r = (ref_e - ref_o)/4 after LN1
            half = (2 ** K) * (X[ref_e] - X[ref_o])
            shadow.gtz_exact = bool(np.all(8 * np.abs(pre2) == half[None, :]))
        C = _center(pre2)
        sq = (C.astype(object) ** 2).sum(axis=0)
        d = C.shape[0]
        out_num = np.empty(C.shape, dtype=np.int64)
        common = 1
        cols = []
        for j in range(C.shape[1]):
            total = int(sq[j])
            t = d * total
            root = math.isqrt(t)
            if root * root != t or total == 0:
                raise IrrationalColumnError(f"block {index}: LayerNorm output at column {j + 1} "
                                            "is irrational")
            # value = C * root / total
            g = math.gcd(root, total)
            cols.append((root // g, total // g))
            common = math.lcm(common, total // g)
        for j, (a, b) in enumerate(cols):
            out_num[:, j] = C[:, j] * a * (common // b)
        shadow.post_ln2_num = out_num
        shadow.post_ln2_den = common
        results.append(shadow)
        g = int(np.gcd.reduce(np.abs(out_num).ravel().tolist() + [common]))
        M, D = out_num // g, common // g
    return ShadowResult(results, M, D)
