"""Bias-free ReLU gadgets used by the compiler.

A :class:`Stage` is a two-layer map ``z -> W2 @ relu(W1 @ z)``.  Inputs are
linear combinations of stream coordinates, written as ``{index: coef}``
dicts.  Without biases every stage is positively homogeneous, so rescaling a
column by ``alpha > 0`` rescales the output by ``alpha``; constants are
therefore taken from the reference pair instead of from biases.

Conventions for one residual column after the first LayerNorm (scale ``s``):

* a Boolean pair ``(odd, even)`` holds ``(-s, s)`` for true, ``(s, -s)`` for false;
* the reference pair holds ``(-2r, 2r)`` with ``r = s/(i+1)``;
* a count pair holds ``(-2Cr, 2Cr)``.
"""

from __future__ import annotations

import numpy as np


class Stage:
    """Builder for one ``relu`` layer followed by a linear read-out."""

    def __init__(self, n_in: int, n_out: int):
        self.n_in = n_in
        self.n_out = n_out
        self.rows: list[dict] = []
        self.outs: list[tuple] = []  # (target, unit, coef)
        self._cache: dict = {}

    def unit(self, lin: dict) -> int:
        """Hidden unit ``relu(lin . z)``; identical units are shared."""
        key = tuple(sorted((k, v) for k, v in lin.items() if v != 0))
        if key not in self._cache:
            self._cache[key] = len(self.rows)
            self.rows.append(dict(key))
        return self._cache[key]

    def add(self, target: int, unit: int, coef: float) -> None:
        self.outs.append((target, unit, coef))

    def linear(self, target: int, lin: dict, coef: float = 1.0) -> None:
        """Add ``coef * lin . z`` to ``target`` via ``relu(x) - relu(-x)``."""
        if not any(lin.values()):
            return
        self.add(target, self.unit(lin), coef)
        self.add(target, self.unit(scale(lin, -1)), -coef)

    def matrices(self) -> tuple[np.ndarray, np.ndarray]:
        h = max(len(self.rows), 1)
        W1 = np.zeros((h, self.n_in))
        for u, row in enumerate(self.rows):
            for k, v in row.items():
                W1[u, k] += v
        W2 = np.zeros((self.n_out, h))
        for t, u, c in self.outs:
            W2[t, u] += c
        return W1, W2

    def __call__(self, z: np.ndarray) -> np.ndarray:
        W1, W2 = self.matrices()
        return W2 @ np.maximum(W1 @ z, 0.0)


def scale(lin: dict, c: float) -> dict:
    return {k: c * v for k, v in lin.items()}


def combine(*parts: tuple) -> dict:
    """Sum of ``(coef, lin)`` pairs."""
    out: dict = {}
    for c, lin in parts:
        for k, v in lin.items():
            out[k] = out.get(k, 0.0) + c * v
    return {k: v for k, v in out.items() if v != 0}


def pair_value(odd: int, even: int) -> dict:
    """``(even - odd) / 2``: the signed magnitude of a pair."""
    return {even: 0.5, odd: -0.5}


def fuse(stages: list[Stage]) -> list[tuple]:
    """Compose stages into one ReLU MLP: ``[(W1_a, 0), (W1_b W2_a, 0), ..., (W2_last, 0)]``."""
    mats = [s.matrices() for s in stages]
    layers = [mats[0][0]]
    for (_, W2_prev), (W1_next, _) in zip(mats, mats[1:]):
        layers.append(W1_next @ W2_prev)
    layers.append(mats[-1][1])
    return [(W, np.zeros(W.shape[0])) for W in layers]


# -- scalar gadgets -------------------------------------------------------------

def relu(x):
    return np.maximum(x, 0.0)


def gtz(x, step: float = 1.0):
    """``min(0.5, x - 0.5) - min(0, x)`` in units of ``step``; -0.5 for x <= 0, 0.5 for x >= 1."""
    x = np.asarray(x, dtype=np.float64) / step
    return step * (np.minimum(0.5, x - 0.5) - np.minimum(0.0, x))


def gtz_relu(u, r):
    """ReLU form of ``gtz`` with step ``r``: ``0.5 relu(r) - relu(r - u) + relu(-u)``."""
    return 0.5 * relu(r) - relu(r - u) + relu(-u)


def gadget_min(x, y):
    return x - relu(x - y)


def gadget_max(x, y):
    return x + relu(y - x)


def add_gtz(stage: Stage, target_odd: int, target_even: int, u: dict, r: dict) -> None:
    """Write ``(-g, g)`` with ``g = gtz_relu(u, r)`` into a target pair."""
    g_parts = [(stage.unit(r), 0.5), (stage.unit(combine((1, r), (-1, u))), -1.0),
               (stage.unit(scale(u, -1)), 1.0)]
    for unit, c in g_parts:
        stage.add(target_even, unit, c)
        stage.add(target_odd, unit, -c)


# -- standalone FFN gadgets (two-layer, bias-free) -------------------------------

def _block_ffn(stage: Stage) -> list[tuple]:
    W1, W2 = stage.matrices()
    return [(W1, np.zeros(W1.shape[0])), (W2, np.zeros(W2.shape[0]))]


def build_arith_ffn(d: int, left: tuple, right: tuple, target: tuple, op: str) -> list[tuple]:
    """FFN writing ``left +/- right`` (count pairs) into ``target`` as a residual update."""
    sign = 1.0 if op == "+" else -1.0
    st = Stage(d, d)
    (lo, le), (ro, re), (to, te) = left, right, target
    st.linear(te, {le: 1.0, re: sign, te: -1.0})
    st.linear(to, {lo: 1.0, ro: sign, to: -1.0})
    return _block_ffn(st)


def build_minmax_ffn(d: int, left: tuple, right: tuple, target: tuple, op: str) -> list[tuple]:
    """FFN writing ``min``/``max`` of two count pairs into ``target`` as a residual update.

    For ``min`` the even (positive) components take the min and the odd
    (negative) components take the max; ``max`` is the mirror image.
    """
    st = Stage(d, d)
    (lo, le), (ro, re), (to, te) = left, right, target
    pos_sign, neg_sign = (-1.0, 1.0) if op == "min" else (1.0, -1.0)
    # even: x + s*relu(s*(y - x)) gives min (s=-1) or max (s=+1)
    st.linear(te, {le: 1.0, te: -1.0})
    st.add(te, st.unit({re: pos_sign, le: -pos_sign}), pos_sign)
    st.linear(to, {lo: 1.0, to: -1.0})
    st.add(to, st.unit({ro: neg_sign, lo: -neg_sign}), neg_sign)
    return _block_ffn(st)


def not_pair(odd: int, even: int, target: tuple, d: int) -> list[tuple]:
    """Negation as a swap of components."""
    st = Stage(d, d)
    to, te = target
    st.linear(to, {even: 1.0, to: -1.0})
    st.linear(te, {odd: 1.0, te: -1.0})
    return _block_ffn(st)


def and_minmax(d: int, x: tuple, y: tuple, target: tuple) -> list[tuple]:
    """Conjunction of Boolean pairs: min of even components, max of odd components."""
    return build_minmax_ffn(d, x, y, target, "min")


def apply_ffn(layers: list[tuple], z: np.ndarray) -> np.ndarray:
    h = z
    for k, (W, b) in enumerate(layers):
        h = W @ h + (b[:, None] if h.ndim == 2 else b)
        if k < len(layers) - 1:
            h = np.maximum(h, 0.0)
    return h
