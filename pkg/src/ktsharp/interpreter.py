"""Reference semantics for Kt[#] formulas, C-RASP programs and C-RASP language models.

Positions are 1-indexed.  Evaluation is vectorized over a batch of
equal-length words: a formula evaluates to a boolean array of shape
``(batch, n)`` whose column ``i - 1`` holds the truth value at position ``i``;
count terms evaluate to integer arrays of the same shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import program as P
from .syntax import (Add, And, Atom, Count, Eq, LinearComparison, Leq, Lt, Not, Num, One, Or,
                     Position, Sub, Top)


class EmptyStringError(ValueError):
    """Acceptance and end-satisfaction need a last position; the empty word has none."""


class PositionError(IndexError):
    pass


class StuckDecodeError(RuntimeError):
    """No next-symbol predicate holds during greedy decoding."""


def as_chars(words) -> np.ndarray:
    """Stack equal-length words into a ``(batch, n)`` array of single characters."""
    if isinstance(words, str):
        words = [words]
    words = list(words)
    if not words:
        return np.empty((0, 0), dtype="<U1")
    n = len(words[0])
    if any(len(w) != n for w in words):
        raise ValueError("batched evaluation needs words of equal length")
    if n == 0:
        return np.empty((len(words), 0), dtype="<U1")
    return np.array([list(w) for w in words], dtype="<U1")


class Evaluator:
    """Memoized evaluation of formulas and terms over one batch of words."""

    def __init__(self, words):
        self.chars = as_chars(words)
        self.shape = self.chars.shape
        self._memo: dict = {}

    def formula(self, f) -> np.ndarray:
        if f in self._memo:
            return self._memo[f]
        if isinstance(f, Atom):
            out = self.chars == f.symbol
        elif isinstance(f, Top):
            out = np.ones(self.shape, dtype=bool)
        elif isinstance(f, Not):
            out = ~self.formula(f.arg)
        elif isinstance(f, And):
            out = self.formula(f.left) & self.formula(f.right)
        elif isinstance(f, Or):
            out = self.formula(f.left) | self.formula(f.right)
        elif isinstance(f, Leq):
            out = self.term(f.left) <= self.term(f.right)
        elif isinstance(f, Lt):
            out = self.term(f.left) < self.term(f.right)
        elif isinstance(f, Eq):
            out = self.term(f.left) == self.term(f.right)
        elif isinstance(f, LinearComparison):
            total = np.full(self.shape, f.constant, dtype=np.int64)
            for coef, body in f.terms:
                total = total + coef * self.count(body)
            out = total >= 0
        else:
            raise TypeError(f"not a formula: {f!r}")
        self._memo[f] = out
        return out

    def count(self, body) -> np.ndarray:
        key = ("#", body)
        if key not in self._memo:
            self._memo[key] = np.cumsum(self.formula(body), axis=1, dtype=np.int64)
        return self._memo[key]

    def term(self, c) -> np.ndarray:
        if isinstance(c, Count):
            return self.count(c.body)
        if isinstance(c, One):
            return np.ones(self.shape, dtype=np.int64)
        if isinstance(c, Num):
            return np.full(self.shape, c.value, dtype=np.int64)
        if isinstance(c, Position):
            return np.broadcast_to(np.arange(1, self.shape[1] + 1, dtype=np.int64), self.shape)
        if isinstance(c, Add):
            return self.term(c.left) + self.term(c.right)
        if isinstance(c, Sub):
            return self.term(c.left) - self.term(c.right)
        raise TypeError(f"not a count term: {c!r}")


def _check_position(w: str, i: int) -> None:
    if not 1 <= i <= len(w):
        raise PositionError(f"position {i} outside [1, {len(w)}]")


def eval_formula(f, w: str, i: int) -> bool:
    """Truth value of ``f`` at position ``i`` of ``w``."""
    _check_position(w, i)
    return bool(Evaluator(w).formula(f)[0, i - 1])


def eval_count(c, w: str, i: int) -> int:
    _check_position(w, i)
    return int(Evaluator(w).term(c)[0, i - 1])


def formula_vector(f, w: str) -> np.ndarray:
    """Truth values of ``f`` at positions ``1..|w|``."""
    return Evaluator(w).formula(f)[0]


def end_satisfies(f, w: str) -> bool:
    if not w:
        raise EmptyStringError("end-satisfaction is undefined on the empty string")
    return bool(Evaluator(w).formula(f)[0, -1])


def end_satisfies_batch(f, words) -> np.ndarray:
    """End-satisfaction for many equal-length nonempty words at once."""
    ev = Evaluator(words)
    if ev.shape[1] == 0:
        raise EmptyStringError("end-satisfaction is undefined on the empty string")
    return ev.formula(f)[:, -1]


# -- C-RASP ------------------------------------------------------------------

CraspTrace = dict  # op name -> vector over positions (bool or int64)


def _binary_body(expr, vals: dict, chars: np.ndarray) -> np.ndarray:
    """Evaluate a binary counting body as a ``(batch, n_i, n_j)`` array."""
    if isinstance(expr, P.At):
        v = _bool_value(expr.name, vals, chars)
        return v[:, :, None] if expr.pos == "i" else v[:, None, :]
    if isinstance(expr, P.BNot):
        return ~_binary_body(expr.arg, vals, chars)
    left = _binary_body(expr.left, vals, chars)
    right = _binary_body(expr.right, vals, chars)
    return (left & right) if isinstance(expr, P.BAnd) else (left | right)


def _bool_value(ref, vals: dict, chars: np.ndarray) -> np.ndarray:
    if isinstance(ref, Atom):
        return chars == ref.symbol
    if isinstance(ref, Top):
        return np.ones(chars.shape, dtype=bool)
    return vals[ref]


_REL = {"<=": np.less_equal, "<": np.less, "=": np.equal, ">=": np.greater_equal,
        ">": np.greater}


def run_crasp_batch(p: P.CraspProgram, words) -> CraspTrace:
    """Values of every operation, each of shape ``(batch, n)``."""
    chars = as_chars(words)
    vals: dict = {}

    def cnt(ref):
        if isinstance(ref, int):
            return np.full(chars.shape, ref, dtype=np.int64)
        return vals[ref]

    for name, op in p.ops:
        if isinstance(op, P.Initial):
            v = chars == op.symbol
        elif isinstance(op, P.BoolNot):
            v = ~_bool_value(op.arg, vals, chars)
        elif isinstance(op, P.BoolAnd):
            v = _bool_value(op.left, vals, chars) & _bool_value(op.right, vals, chars)
        elif isinstance(op, P.BoolOr):
            v = _bool_value(op.left, vals, chars) | _bool_value(op.right, vals, chars)
        elif isinstance(op, P.Compare):
            v = _REL[op.rel](cnt(op.left), cnt(op.right))
        elif isinstance(op, P.BoolConst):
            v = np.ones(chars.shape, dtype=bool)
        elif isinstance(op, P.Counting):
            v = np.cumsum(_bool_value(op.body, vals, chars), axis=1, dtype=np.int64)
        elif isinstance(op, P.Conditional):
            v = np.where(_bool_value(op.cond, vals, chars), vals[op.then], vals[op.orelse])
        elif isinstance(op, P.CountAdd):
            v = vals[op.left] + vals[op.right]
        elif isinstance(op, P.CountSub):
            v = vals[op.left] - vals[op.right]
        elif isinstance(op, P.CountMin):
            v = np.minimum(vals[op.left], vals[op.right])
        elif isinstance(op, P.CountMax):
            v = np.maximum(vals[op.left], vals[op.right])
        elif isinstance(op, P.CountConst):
            v = np.full(chars.shape, op.value, dtype=np.int64)
        elif isinstance(op, P.BinaryCounting):
            n = chars.shape[1]
            body = _binary_body(op.body, vals, chars)
            body = body & np.tril(np.ones((n, n), dtype=bool))[None]
            v = body.sum(axis=2, dtype=np.int64)
        else:
            raise TypeError(f"unknown operation {op!r}")
        vals[name] = np.asarray(v)
    return vals


def run_crasp(p: P.CraspProgram, w: str) -> CraspTrace:
    """Per-operation vectors over positions ``1..|w|``."""
    if not w:
        raise EmptyStringError("C-RASP programs are run on nonempty strings")
    return {name: v[0] for name, v in run_crasp_batch(p, [w]).items()}


def crasp_accepts(p: P.CraspProgram, w: str) -> bool:
    if not w:
        raise EmptyStringError("acceptance is undefined on the empty string")
    return bool(run_crasp_batch(p, [w])[p.output][0, -1])


def crasp_accepts_batch(p: P.CraspProgram, words) -> np.ndarray:
    vals = run_crasp_batch(p, words)
    out = vals[p.output]
    if out.shape[1] == 0:
        raise EmptyStringError("acceptance is undefined on the empty string")
    return out[:, -1]


# -- language models ---------------------------------------------------------

def lm_assigns_nonzero(lm: P.LmProgram, w: str) -> bool:
    """Whether greedy-mask decoding can emit ``w`` followed by EOS."""
    if not w:
        raise EmptyStringError("the language model is defined on nonempty strings")
    if lm.eos in w:
        return False
    vals = run_crasp(lm.base, w)
    for i in range(len(w) - 1):
        if not vals[lm.next_ops[w[i + 1]]][i]:
            return False
    return bool(vals[lm.next_ops[lm.eos]][-1])


@dataclass(frozen=True)
class DecodeResult:
    text: str
    status: str  # "eos" or "max_steps"

    def __str__(self) -> str:
        return self.text


def lm_greedy_decode(lm: P.LmProgram, prompt: str, max_steps: int, tie_break=None) -> DecodeResult:
    """Greedily extend ``prompt`` with the first allowed symbol under ``tie_break``.

    ``max_steps`` caps the length of the returned string.  Decoding stops with
    status ``"eos"`` when EOS is chosen and ``"max_steps"`` when the cap is hit.
    """
    if not prompt:
        raise EmptyStringError("greedy decoding needs a nonempty prompt")
    if lm.eos in prompt:
        raise ValueError("the prompt must not contain the EOS letter")
    order = list(tie_break) if tie_break is not None else lm.letters + [lm.eos]
    symbols = set(lm.letters) | {lm.eos}
    if set(order) != symbols or len(order) != len(symbols):
        raise ValueError(f"tie-break order must list each of {sorted(symbols)} once")
    w = prompt
    while True:
        vals = run_crasp(lm.base, w)
        choice = next((a for a in order if vals[lm.next_ops[a]][-1]), None)
        if choice is None:
            raise StuckDecodeError(f"no next symbol is allowed after {w!r}")
        if choice == lm.eos:
            return DecodeResult(w, "eos")
        if len(w) >= max_steps:
            return DecodeResult(w, "max_steps")
        w += choice
