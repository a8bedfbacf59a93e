"""Compile Kt[#] formulas into post-norm transformers with one block per modal depth.

Stream layout (pairs are ``(2k-1, 2k)`` in 1-based terms):

* pair 0, the start pair: true at BOS only;
* pair 1, the reference pair: counts the start pair, giving ``1/(i+1)``;
* one pair per Boolean subformula, ordered by modal depth;
* a pool of count pairs, reused by every block.

Every coordinate is ``+-1`` between blocks.  Count and reference pairs are
kept at ``(-1, +1)`` ("pre-seeded"), so after attention a count pair holds
``(-2C/(i+1), 2C/(i+1))`` with no affine correction beyond halving.

Block ``m`` counts the bodies of the depth-``m`` comparisons, then one fused
ReLU MLP (no biases) does three things in sequence:

1. ``gtz`` every Boolean pair and decide the new comparisons, making every
   coordinate ``+-h`` with ``h = 1/(2(i+1))`` up to the LayerNorm scale;
2. evaluate the depth-``m`` Boolean combinations from their canonical DNF;
3. force the new pairs to false at BOS.

The second LayerNorm then restores every coordinate to exactly ``+-1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gadgets import Stage, add_gtz, combine, fuse, pair_value
from .runtime import BOS, Block, TransformerModel
from .syntax import (And, Atom, Leq, LinearComparison, Not, Top, desugar, linear_comparison,
                     modal_depth, pretty, to_canonical_dnf, walk, DEFAULT_LITERAL_CAP)

START_KEY = "<start>"
REF_KEY = "<ref>"
DEFAULT_MAX_DIMS = 4096


class CompilationError(ValueError):
    pass


@dataclass(frozen=True)
class Stratum:
    depth: int
    counts: tuple  # distinct count bodies
    comparisons: tuple  # (node, LinearComparison)
    skeletons: tuple  # (node, DnfSkeleton)


@dataclass(frozen=True)
class CompilationPlan:
    formula: object
    alphabet: tuple
    depth0: tuple  # Boolean subformulas simulated in the embedding
    strata: tuple  # Stratum for depths 1..md
    pairs: dict  # node -> pair index
    pool: int  # number of count pairs

    @property
    def n_pairs(self) -> int:
        return 2 + len(self.pairs) + self.pool

    @property
    def d(self) -> int:
        return 2 * self.n_pairs

    def count_pair(self, slot: int) -> int:
        return 2 + len(self.pairs) + slot


def _dims(pair: int) -> tuple[int, int]:
    return 2 * pair, 2 * pair + 1


def _dnf_leaves(node, depth: int, depths: dict) -> list:
    """Leaves of a depth-``m`` Boolean combination: descend through same-depth Not/And."""
    out: list = []
    stack = [node]
    while stack:
        g = stack.pop()
        if isinstance(g, (Not, And)) and depths[g] == depth:
            stack.extend([g.arg] if isinstance(g, Not) else [g.right, g.left])
        elif isinstance(g, Top):
            continue
        elif g not in out:
            out.append(g)
    return out


def plan(f, alphabet, *, literal_cap: int = DEFAULT_LITERAL_CAP) -> CompilationPlan:
    f = desugar(f)
    nodes = [g for g in walk(f) if isinstance(g, (Atom, Top, Not, And, Leq, LinearComparison))]
    memo: dict = {}
    depths = {g: modal_depth(g, memo) for g in nodes}
    order = sorted(range(len(nodes)), key=lambda k: (depths[nodes[k]], k))
    nodes = [nodes[k] for k in order]
    pairs = {g: 2 + k for k, g in enumerate(nodes)}
    md = max(depths.values())
    depth0 = tuple(g for g in nodes if depths[g] == 0)
    strata = []
    for m in range(1, md + 1):
        comparisons = []
        skeletons = []
        bodies: list = []
        for g in nodes:
            if depths[g] != m:
                continue
            if isinstance(g, (Leq, LinearComparison)):
                lc = g if isinstance(g, LinearComparison) else linear_comparison(g)
                comparisons.append((g, lc))
                for _, body in lc.terms:
                    if body not in bodies:
                        bodies.append(body)
            else:
                skeletons.append((g, to_canonical_dnf(g, _dnf_leaves(g, m, depths), literal_cap)))
        strata.append(Stratum(m, tuple(bodies), tuple(comparisons), tuple(skeletons)))
    pool = max((len(s.counts) for s in strata), default=0)
    return CompilationPlan(f, tuple(alphabet), depth0, tuple(strata), pairs, pool)


# -- gadget builders ------------------------------------------------------------------

def _truth_on_letter(g, letter) -> bool:
    if isinstance(g, Atom):
        return g.symbol == letter
    if isinstance(g, Top):
        return True
    if isinstance(g, Not):
        return not _truth_on_letter(g.arg, letter)
    if isinstance(g, And):
        return _truth_on_letter(g.left, letter) and _truth_on_letter(g.right, letter)
    if isinstance(g, (Leq, LinearComparison)):
        # no counts at depth 0, so this compares constants
        lc = g if isinstance(g, LinearComparison) else linear_comparison(g)
        if not lc.terms:
            return lc.constant >= 0
    raise CompilationError(f"{pretty(g)} is not a depth-0 formula")


def build_embedding(p: CompilationPlan) -> dict:
    """Per-symbol columns: depth-0 truth tables, start pair true only at BOS."""
    table = {}
    for symbol in p.alphabet + (BOS,):
        v = np.empty(p.d)
        for k in range(p.n_pairs):
            v[2 * k], v[2 * k + 1] = 1.0, -1.0  # false
        for g in p.depth0:
            if symbol != BOS and _truth_on_letter(g, symbol):
                o, e = _dims(p.pairs[g])
                v[o], v[e] = -1.0, 1.0
        if symbol == BOS:
            v[0], v[1] = -1.0, 1.0
        for k in [1] + [p.count_pair(s) for s in range(p.pool)]:
            v[2 * k], v[2 * k + 1] = -1.0, 1.0  # pre-seed
        table[symbol] = v
    return table


def build_count_attention(p: CompilationPlan, stratum: Stratum) -> tuple:
    """Uniform attention routing each body pair into a pool pair and the start pair into the reference."""
    d = p.d
    W_V = np.zeros((d, d))
    routes = [(0, 1)] + [(p.pairs[body], p.count_pair(slot))
                         for slot, body in enumerate(stratum.counts)]
    for src, dst in routes:
        so, se = _dims(src)
        to, te = _dims(dst)
        W_V[to, so] = 1.0
        W_V[te, se] = 1.0
    zeros = np.zeros((1, d))
    return zeros, zeros.copy(), W_V


def _reference(p: CompilationPlan) -> dict:
    """``r = (ref_even - ref_odd) / 4`` on the post-LN1 column."""
    o, e = _dims(1)
    return {e: 0.25, o: -0.25}


def build_comparison_ffn(p: CompilationPlan, stratum: Stratum) -> Stage:
    """First stage: ``gtz`` on every Boolean pair and on the new comparisons.

    Output layout is ``[y, x]``: the thresholded column followed by the
    untouched input (needed for the residual read-out).
    """
    d = p.d
    st = Stage(d, 2 * d)
    r = _reference(p)
    slot = {body: k for k, body in enumerate(stratum.counts)}
    comparisons = dict(stratum.comparisons)
    for k in range(d):
        st.linear(d + k, {k: 1.0})
    for node, pair in [(None, 0)] + sorted(p.pairs.items(), key=lambda kv: kv[1]):
        o, e = _dims(pair)
        if node in comparisons:
            lc = comparisons[node]
            parts = [(lc.constant + 1.0, r)]
            for coef, body in lc.terms:
                co, ce = _dims(p.count_pair(slot[body]))
                parts.append((coef * 0.25, {ce: 1.0, co: -1.0}))
            u = combine(*parts)
        else:
            u = pair_value(o, e)
        add_gtz(st, o, e, u, r)
    half = st.unit(r)
    for pair in [1] + [p.count_pair(s) for s in range(p.pool)]:
        o, e = _dims(pair)
        st.add(e, half, 0.5)
        st.add(o, half, -0.5)
    return st


def build_boolean_ffn(p: CompilationPlan, stratum: Stratum) -> Stage:
    """Second stage: canonical-DNF evaluation of the depth-``m`` Boolean combinations."""
    d = p.d
    st = Stage(2 * d, 2 * d)
    targets = {p.pairs[node]: skel for node, skel in stratum.skeletons}
    ro, re = _dims(1)
    h = {re: 0.5, ro: -0.5}
    for k in range(d, 2 * d):
        st.linear(k, {k: 1.0})
    for pair in range(p.n_pairs):
        if pair in targets:
            continue
        o, e = _dims(pair)
        st.linear(o, {o: 1.0})
        st.linear(e, {e: 1.0})
    h_unit = st.unit(h)
    for pair, skel in targets.items():
        o, e = _dims(pair)
        for clause in skel.clauses:
            parts = [(2.0 - len(clause), h)]
            for lit, positive in clause:
                lo, le = _dims(p.pairs[skel.literals[lit]])
                parts.append((1.0 if positive else -1.0, pair_value(lo, le)))
            u = st.unit(combine(*parts))
            st.add(e, u, 1.0)
            st.add(o, u, -1.0)
        st.add(e, h_unit, -1.0)
        st.add(o, h_unit, 1.0)
    return st


def build_bos_reset(p: CompilationPlan, reset_pairs) -> Stage:
    """Final stage: make ``reset_pairs`` false at BOS and emit ``y - x`` for the residual.

    ``odd <- max(odd, start_even)`` and ``even <- min(even, start_odd)``; away
    from BOS the start pair is false, so both are no-ops there.
    """
    d = p.d
    st = Stage(2 * d, d)
    so, se = _dims(0)
    for k in range(d):
        st.linear(k, {k: 1.0, d + k: -1.0})
    for pair in reset_pairs:
        o, e = _dims(pair)
        st.add(o, st.unit({se: 1.0, o: -1.0}), 1.0)
        st.add(e, st.unit({e: 1.0, so: -1.0}), -1.0)
    return st


def build_block(p: CompilationPlan, stratum: Stratum) -> Block:
    W_Q, W_K, W_V = build_count_attention(p, stratum)
    stages = [build_comparison_ffn(p, stratum), build_boolean_ffn(p, stratum)]
    new_pairs = [p.pairs[g] for g, _ in stratum.comparisons]
    new_pairs += [p.pairs[g] for g, _ in stratum.skeletons]
    stages.append(build_bos_reset(p, new_pairs))
    return Block(W_Q, W_K, W_V, fuse(stages))


def _dim_map(p: CompilationPlan) -> dict:
    out = {START_KEY: (1, 2, "start"), REF_KEY: (3, 4, "reference")}
    for g, pair in p.pairs.items():
        out[pretty(g)] = (2 * pair + 1, 2 * pair + 2, "boolean")
    for s in p.strata:
        for slot, body in enumerate(s.counts):
            k = p.count_pair(slot)
            out[f"#[{pretty(body)}]@{s.depth}"] = (2 * k + 1, 2 * k + 2, "count")
    return out


def compile_formula(f, alphabet, *, max_dims: int = DEFAULT_MAX_DIMS,
                    literal_cap: int = DEFAULT_LITERAL_CAP) -> TransformerModel:
    """A transformer with ``modal_depth(f)`` blocks simulating every subformula of ``f``."""
    alphabet = tuple(alphabet)
    unknown = {g.symbol for g in walk(desugar(f)) if isinstance(g, Atom)} - set(alphabet)
    if unknown:
        raise CompilationError(f"letters {sorted(unknown)} are not in the alphabet")
    p = plan(f, alphabet, literal_cap=literal_cap)
    if p.d > max_dims:
        raise CompilationError(f"model needs {p.d} dimensions, above the cap of {max_dims}")
    blocks = [build_block(p, s) for s in p.strata]
    return TransformerModel(alphabet, p.d, build_embedding(p), blocks, _dim_map(p),
                            output=pretty(p.formula))


compile = compile_formula  # noqa: A001


# -- composition and reporting -----------------------------------------------------------

def identity_block(d: int) -> Block:
    zeros = np.zeros((1, d))
    return Block(zeros, zeros.copy(), np.zeros((d, d)),
                 [(np.zeros((1, d)), np.zeros(1)), (np.zeros((d, 1)), np.zeros(d))])


def _block_diag(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]))
    out[:a.shape[0], :a.shape[1]] = a
    out[a.shape[0]:, a.shape[1]:] = b
    return out


def _merge_blocks(b1: Block, b2: Block) -> Block:
    depth = max(len(b1.ffn), len(b2.ffn))
    l1 = _pad_layers(b1.ffn, depth)
    l2 = _pad_layers(b2.ffn, depth)
    layers = [(_block_diag(W1, W2), np.concatenate([c1, c2])) for (W1, c1), (W2, c2) in zip(l1, l2)]
    d = b1.d + b2.d
    return Block(np.zeros((1, d)), np.zeros((1, d)), _block_diag(b1.W_V, b2.W_V), layers)


def _pad_layers(layers: list, depth: int) -> list:
    """Insert zero-width hidden layers so two MLPs have the same number of layers."""
    layers = list(layers)
    while len(layers) < depth:
        W_last, b_last = layers[-1]
        # a zero map stays zero through extra ReLU layers
        layers = layers[:-1] + [(np.zeros((1, W_last.shape[1])), np.zeros(1)),
                                (np.zeros((W_last.shape[0], 1)), np.zeros(W_last.shape[0]))]
        if W_last.any() or b_last.any():
            raise CompilationError("can only pad identity FFNs")
    return layers


def parallel_compose(m1: TransformerModel, m2: TransformerModel) -> TransformerModel:
    """Run two models side by side on one stream of ``d1 + d2`` dimensions.

    The shallower model is padded with identity blocks.  Keys of the merged
    ``dim_map`` are prefixed with ``1:`` and ``2:``.
    """
    if m1.alphabet != m2.alphabet:
        raise CompilationError("cannot compose models over different alphabets")
    n = max(len(m1.blocks), len(m2.blocks))
    blocks1 = list(m1.blocks) + [identity_block(m1.d) for _ in range(n - len(m1.blocks))]
    blocks2 = list(m2.blocks) + [identity_block(m2.d) for _ in range(n - len(m2.blocks))]
    blocks = []
    for b1, b2 in zip(blocks1, blocks2):
        blocks.append(_merge_blocks(b1, b2))
    embedding = {s: np.concatenate([m1.embedding[s], m2.embedding[s]]) for s in m1.embedding}
    dim_map = {f"1:{k}": v for k, v in m1.dim_map.items()}
    dim_map.update({f"2:{k}": (v[0] + m1.d, v[1] + m1.d, v[2]) for k, v in m2.dim_map.items()})
    output = None if m1.output is None else f"1:{m1.output}"
    return TransformerModel(m1.alphabet, m1.d + m2.d, embedding, blocks, dim_map, output)


def report(f, alphabet, model: TransformerModel | None = None) -> str:
    """Human-readable stratum table, dimension map and gadget inventory."""
    p = plan(f, alphabet)
    model = model or compile_formula(f, alphabet)
    lines = [f"formula: {pretty(p.formula)}", f"alphabet: {' '.join(p.alphabet)}",
             f"modal depth: {len(p.strata)}   blocks: {len(model.blocks)}   d: {model.d}", ""]
    lines.append("depth 0 (embedding):")
    lines += [f"  {pretty(g)}" for g in p.depth0]
    for s in p.strata:
        lines.append(f"depth {s.depth} (block {s.depth}):")
        lines += [f"  count    #[{pretty(b)}]" for b in s.counts]
        lines += [f"  compare  {pretty(g)}" for g, _ in s.comparisons]
        lines += [f"  boolean  {pretty(g)}  ({len(k.clauses)} clauses over {len(k.literals)} "
                  f"literals)" for g, k in s.skeletons]
    lines += ["", "dimension map:"]
    for key, (o, e, role) in sorted(model.dim_map.items(), key=lambda kv: (kv[1][0], kv[0])):
        lines.append(f"  {o:>4} {e:>4}  {role:<9} {key}")
    lines += ["", "gadgets:"]
    for k, b in enumerate(model.blocks, start=1):
        widths = " -> ".join(str(w) for w in [model.d] + b.hidden + [model.d])
        lines.append(f"  block {k}: uniform attention, {int(np.count_nonzero(b.W_V)) // 2} "
                     f"routed pairs; FFN {widths}")
    return "\n".join(lines) + "\n"
