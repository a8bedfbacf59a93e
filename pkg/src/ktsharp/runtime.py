"""A small numpy runtime for post-norm transformers with future-masked softmax attention.

A residual stream is a ``(d, n + 1)`` float64 matrix whose first column is
BOS.  Batched functions accept ``(batch, d, n + 1)`` arrays; every operation
acts on the last two axes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

BOS = "<BOS>"


class ZeroVarianceError(FloatingPointError):
    """A LayerNorm column has zero variance."""


class ModelFormatError(ValueError):
    """A model file is malformed or its shapes are inconsistent."""


@dataclass
class Block:
    """Single-head attention plus a ReLU MLP.

    ``ffn`` is a list of ``(W, b)`` layers with ReLU between consecutive
    layers and none after the last; a two-layer FFN is the usual case.
    """

    W_Q: np.ndarray
    W_K: np.ndarray
    W_V: np.ndarray
    ffn: list

    @property
    def d(self) -> int:
        return self.W_V.shape[0]

    @property
    def hidden(self) -> list[int]:
        return [W.shape[0] for W, _ in self.ffn[:-1]]

    def check(self, d: int) -> None:
        if self.W_V.shape != (d, d):
            raise ModelFormatError(f"W_V has shape {self.W_V.shape}, expected {(d, d)}")
        if self.W_Q.shape != self.W_K.shape or self.W_Q.shape[1] != d:
            raise ModelFormatError("W_Q/W_K shapes are inconsistent with d")
        width = d
        for k, (W, b) in enumerate(self.ffn):
            if W.ndim != 2 or W.shape[1] != width or b.shape != (W.shape[0],):
                raise ModelFormatError(f"FFN layer {k} has inconsistent shape {W.shape}")
            width = W.shape[0]
        if width != d:
            raise ModelFormatError(f"FFN output width {width} differs from d = {d}")


@dataclass
class TransformerModel:
    alphabet: tuple
    d: int
    embedding: dict  # symbol (or BOS) -> vector of length d
    blocks: list
    dim_map: dict = field(default_factory=dict)  # key -> (odd, even, role), 1-based
    output: str | None = None

    def __post_init__(self):
        self.alphabet = tuple(self.alphabet)
        self.embedding = {s: np.asarray(v, dtype=np.float64) for s, v in self.embedding.items()}
        self.check()

    def check(self) -> None:
        if self.d % 2:
            raise ModelFormatError(f"d must be even, got {self.d}")
        for s in self.alphabet + (BOS,):
            if s not in self.embedding:
                raise ModelFormatError(f"no embedding for {s!r}")
            if self.embedding[s].shape != (self.d,):
                raise ModelFormatError(f"embedding of {s!r} has wrong length")
        for block in self.blocks:
            block.check(self.d)
        for key, (odd, even, _) in self.dim_map.items():
            if not (even == odd + 1 and odd % 2 == 1 and 1 <= odd and even <= self.d):
                raise ModelFormatError(f"dim_map entry {key!r} is not a pair (2k-1, 2k)")

    def pair(self, key: str) -> tuple[int, int]:
        """0-based row indices of the pair mapped to ``key``."""
        odd, even, _ = self.dim_map[key]
        return odd - 1, even - 1

    def embedding_matrix(self) -> np.ndarray:
        """``(d, |alphabet| + 1)`` matrix, BOS last."""
        return np.stack([self.embedding[s] for s in self.alphabet + (BOS,)], axis=1)


# -- layers ---------------------------------------------------------------------

def word_embed(model: TransformerModel, w) -> np.ndarray:
    """Embed ``w`` with BOS prepended: a ``(d, n + 1)`` matrix (or batched)."""
    if not isinstance(w, str):
        return word_embed_batch(model, list(w))
    for ch in w:
        if ch not in model.alphabet:
            raise ValueError(f"letter {ch!r} is not in the alphabet {model.alphabet}")
    return np.stack([model.embedding[BOS]] + [model.embedding[ch] for ch in w], axis=1)


def word_embed_batch(model: TransformerModel, words: list[str]) -> np.ndarray:
    index = {s: k for k, s in enumerate(model.alphabet)}
    n = len(words[0])
    codes = np.full((len(words), n + 1), len(model.alphabet), dtype=np.int64)
    for b, w in enumerate(words):
        if len(w) != n:
            raise ValueError("batched forward needs words of equal length")
        for k, ch in enumerate(w):
            if ch not in index:
                raise ValueError(f"letter {ch!r} is not in the alphabet {model.alphabet}")
            codes[b, k + 1] = index[ch]
    table = model.embedding_matrix()  # (d, |Σ| + 1)
    return np.transpose(table[:, codes], (1, 0, 2))


def self_attention(block: Block, A: np.ndarray, future_masked: bool = True) -> np.ndarray:
    """Softmax attention; column ``i`` averages ``W_V A`` over columns ``j <= i``."""
    if A.shape[-2] != block.d:
        raise ValueError(f"stream has {A.shape[-2]} rows, block expects {block.d}")
    V = block.W_V @ A
    N = A.shape[-1]
    if not block.W_Q.any() or not block.W_K.any():
        # all scores are zero, so the softmax is the uniform prefix mean
        if not future_masked:
            return np.repeat(V.mean(axis=-1, keepdims=True), N, axis=-1)
        return np.cumsum(V, axis=-1) / np.arange(1, N + 1)
    Q = block.W_Q @ A
    K = block.W_K @ A
    scores = np.swapaxes(Q, -1, -2) @ K / np.sqrt(block.d)  # (..., N_i, N_j)
    if future_masked:
        scores = np.where(np.tril(np.ones((N, N), dtype=bool)), scores, -np.inf)
    scores = scores - scores.max(axis=-1, keepdims=True)
    weights = np.exp(scores)
    weights /= weights.sum(axis=-1, keepdims=True)
    return V @ np.swapaxes(weights, -1, -2)


def ffn(block: Block, A: np.ndarray) -> np.ndarray:
    h = A
    for k, (W, b) in enumerate(block.ffn):
        h = W @ h + b[:, None]
        if k < len(block.ffn) - 1:
            h = np.maximum(h, 0.0)
    return h


def layer_norm(A: np.ndarray) -> np.ndarray:
    """Center each column and divide by its standard deviation (no learned parameters)."""
    mu = A.mean(axis=-2, keepdims=True)
    centered = A - mu
    sigma = np.sqrt((centered ** 2).mean(axis=-2, keepdims=True))
    if np.any(sigma == 0):
        raise ZeroVarianceError("LayerNorm applied to a zero-variance column")
    return centered / sigma


def block_forward(block: Block, A: np.ndarray, trace: dict | None = None) -> np.ndarray:
    """``LN2(FFN(A') + A')`` with ``A' = LN1(SA(A) + A)``."""
    pre_ln1 = self_attention(block, A) + A
    post_ln1 = layer_norm(pre_ln1)
    ffn_out = ffn(block, post_ln1)
    pre_ln2 = ffn_out + post_ln1
    out = layer_norm(pre_ln2)
    if trace is not None:
        trace.update(pre_ln1=pre_ln1, post_ln1=post_ln1, ffn_out=ffn_out, pre_ln2=pre_ln2,
                     post_ln2=out)
    return out


def model_forward(model: TransformerModel, w, *, trace: bool = False):
    """Final residual stream for ``w``; with ``trace=True`` also per-block intermediates."""
    A = word_embed(model, w)
    traces = [{"embedding": A}]
    for block in model.blocks:
        t: dict | None = {} if trace else None
        A = block_forward(block, A, t)
        if trace:
            traces.append(t)
    return (A, traces) if trace else A


def forward_batch(model: TransformerModel, words, chunk: int = 4096) -> np.ndarray:
    """Final streams ``(batch, d, n + 1)`` for equal-length words, in chunks."""
    words = list(words)
    out = []
    for start in range(0, len(words), chunk):
        A = word_embed_batch(model, words[start:start + chunk])
        for block in model.blocks:
            A = block_forward(block, A)
        out.append(A)
    return np.concatenate(out, axis=0)


def accepts(model: TransformerModel, w: str) -> bool:
    """Sign of the output pair at the last position."""
    odd, even = model.pair(model.output)
    A = model_forward(model, w)
    return bool(A[even, -1] > A[odd, -1])


# -- serialization -----------------------------------------------------------------

def _hex(a: np.ndarray):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        return [float(x).hex() for x in a]
    return [_hex(row) for row in a]


def _unhex(x, ndim: int) -> np.ndarray:
    try:
        if ndim == 1:
            return np.array([float.fromhex(v) for v in x], dtype=np.float64)
        rows = [_unhex(r, 1) for r in x]
    except (TypeError, ValueError) as e:
        raise ModelFormatError(f"bad number encoding: {e}") from None
    if not rows:
        return np.zeros((0, 0))
    if len({len(r) for r in rows}) != 1:
        raise ModelFormatError("ragged matrix")
    return np.stack(rows)


def model_to_dict(model: TransformerModel) -> dict:
    return {
        "format": "ktsharp-model/1",
        "alphabet": list(model.alphabet),
        "d": model.d,
        "output": model.output,
        "embedding": {s: _hex(v) for s, v in model.embedding.items()},
        "blocks": [
            {
                "W_Q": _hex(b.W_Q),
                "W_K": _hex(b.W_K),
                "W_V": _hex(b.W_V),
                "ffn": [{"W": _hex(W), "b": _hex(bias)} for W, bias in b.ffn],
            }
            for b in model.blocks
        ],
        "dim_map": {k: list(v) for k, v in model.dim_map.items()},
    }


def model_from_dict(doc: dict) -> TransformerModel:
    try:
        d = int(doc["d"])
        blocks = []
        for b in doc["blocks"]:
            W_Q = _unhex(b["W_Q"], 2).reshape(-1, d)
            W_K = _unhex(b["W_K"], 2).reshape(-1, d)
            layers = [(_unhex(layer["W"], 2), _unhex(layer["b"], 1)) for layer in b["ffn"]]
            blocks.append(Block(W_Q, W_K, _unhex(b["W_V"], 2), layers))
        return TransformerModel(
            alphabet=tuple(doc["alphabet"]),
            d=d,
            embedding={s: _unhex(v, 1) for s, v in doc["embedding"].items()},
            blocks=blocks,
            dim_map={k: (int(v[0]), int(v[1]), str(v[2])) for k, v in doc["dim_map"].items()},
            output=doc.get("output"),
        )
    except ModelFormatError:
        raise
    except (KeyError, TypeError, IndexError, ValueError) as e:
        raise ModelFormatError(f"missing or malformed field: {e}") from None


def save_model(model: TransformerModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1), encoding="utf-8")


def load_model(path) -> TransformerModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"not a model file: {e}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("model file must contain a JSON object")
    return model_from_dict(doc)
