"""Differential testing: oracles, corpus, string generators, fuzzers and ``diff_test``."""

from __future__ import annotations

import itertools
import json
import random
import re
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import program as P
from .interpreter import Evaluator, run_crasp_batch
from .parsing import load
from .runtime import TransformerModel, forward_batch
from .syntax import (Add, And, Atom, Count, Formula, Leq, LinearComparison, Not, Num, One, Or,
                     Position, Sub, Top, Eq, Lt, desugar, pretty, walk)
from .translator import FocNormalForm

# -- oracles -------------------------------------------------------------------

_AB = re.compile(r"a*b*")
_ABA = re.compile(r"a*b*a*")


def _anbncn(w: str) -> bool:
    n = len(w) // 3
    return n >= 1 and w == "a" * n + "b" * n + "c" * n


def _dyck1(w: str) -> bool:
    depth = 0
    for ch in w:
        depth += 1 if ch == "(" else -1
        if depth < 0:
            return False
    return depth == 0


def is_subsequence(s: str, w: str) -> bool:
    k = 0
    for ch in w:
        if k < len(s) and ch == s[k]:
            k += 1
    return k == len(s)


ORACLES = {
    "astar_bstar": lambda w: _AB.fullmatch(w) is not None,
    "astar_bstar_astar": lambda w: _ABA.fullmatch(w) is not None,
    "anbncn": _anbncn,
    "dyck1": _dyck1,
    "hello": lambda w: w == "hello",
}

ALPHABETS = {
    "astar_bstar": ("a", "b"),
    "astar_bstar_astar": ("a", "b"),
    "anbncn": ("a", "b", "c"),
    "dyck1": ("(", ")"),
    "hello": ("e", "h", "l", "o"),
}


def oracle_membership(language: str, w: str) -> bool:
    """Membership by an implementation independent of Kt[#]; ``subseq:s`` tests for subsequence ``s``."""
    if language.startswith("subseq:"):
        return is_subsequence(language[len("subseq:"):], w)
    if language not in ORACLES:
        raise KeyError(f"unknown language {language!r}")
    return ORACLES[language](w)


def subsequence_formula(s: str) -> Formula:
    """``tau_n >= 1`` where ``tau_k`` counts the ends of the prefix ``s[:k]`` as a subsequence."""
    if not s:
        raise ValueError("s must be nonempty")
    tau = Count(Atom(s[0]))
    for prev, cur in zip(s, s[1:]):
        need = 2 if prev == cur else 1
        tau = Count(And(Atom(cur), Leq(Num(need), tau)))
    return desugar(Leq(Num(1), tau))


# -- corpus ------------------------------------------------------------------------

@dataclass
class CorpusEntry:
    name: str
    kind: str  # kt, crasp, lm, foc
    language: str
    alphabet: tuple
    obj: object
    path: str


def corpus_dir() -> Path:
    return Path(str(resources.files("ktsharp") / "corpus"))


def load_corpus() -> list[CorpusEntry]:
    entries = []
    for path in sorted(corpus_dir().iterdir()):
        if path.suffix not in (".kt", ".crasp", ".lm", ".foc"):
            continue
        kind, obj = load(path)
        if kind == "kt":
            alphabet, obj = obj
        elif kind == "lm":
            alphabet = tuple(obj.letters)
        else:
            alphabet = tuple(obj.alphabet)
        language = path.stem if path.stem in ORACLES else ""
        entries.append(CorpusEntry(f"{path.stem}{path.suffix}", kind, language, alphabet, obj,
                                   str(path)))
    return entries


def corpus_entry(name: str) -> CorpusEntry:
    for e in load_corpus():
        if e.name == name:
            return e
    raise KeyError(name)


# -- strings ----------------------------------------------------------------------

def strings_of_length(alphabet, n: int) -> list[str]:
    return ["".join(t) for t in itertools.product(alphabet, repeat=n)]


def all_strings(alphabet, max_len: int, min_len: int = 1):
    """Every word of length ``min_len..max_len``, shortest first."""
    for n in range(min_len, max_len + 1):
        yield from strings_of_length(alphabet, n)


def _sample_member(language: str, rng: random.Random, max_len: int) -> str:
    if language == "dyck1":
        half = rng.randint(1, max(1, max_len // 2))
        out, opened, closed = [], 0, 0
        while closed < half:
            if opened < half and (opened == closed or rng.random() < 0.5):
                out.append("(")
                opened += 1
            else:
                out.append(")")
                closed += 1
        return "".join(out)
    if language == "anbncn":
        n = rng.randint(1, max(1, max_len // 3))
        return "a" * n + "b" * n + "c" * n
    if language == "astar_bstar":
        i = rng.randint(0, max_len)
        return "a" * i + "b" * rng.randint(0, max_len - i)
    if language == "astar_bstar_astar":
        i = rng.randint(0, max_len)
        j = rng.randint(0, max_len - i)
        return "a" * i + "b" * j + "a" * rng.randint(0, max_len - i - j)
    if language == "hello":
        return "hello"
    return ""


def _mutate(w: str, alphabet, rng: random.Random) -> str:
    k = rng.randrange(len(w) + 1)
    op = rng.randrange(3)
    if op == 0 and w:
        k = min(k, len(w) - 1)
        return w[:k] + rng.choice(alphabet) + w[k + 1:]
    if op == 1:
        return w[:k] + rng.choice(alphabet) + w[k:]
    return w[:k] + w[k + 1:]


def random_strings(alphabet, count: int, max_len: int, seed: int, language: str = "") -> list[str]:
    """Seeded words of length ``1..max_len``.

    Half are uniform (length uniform, letters i.i.d.).  When ``language`` has a
    sampler, the other half are members, possibly with one random edit, which
    keeps the decision margins tight.
    """
    rng = random.Random(seed)
    alphabet = list(alphabet)
    out = []
    for k in range(count):
        w = ""
        if language and k % 2 == 1:
            w = _sample_member(language, rng, max_len)
            if w and rng.random() < 0.5:
                w = _mutate(w, alphabet, rng)
            w = w[:max_len]
        if not w:
            n = rng.randint(1, max_len)
            w = "".join(rng.choice(alphabet) for _ in range(n))
        out.append(w)
    return out


def by_length(words) -> dict:
    groups: dict = {}
    for w in words:
        groups.setdefault(len(w), []).append(w)
    return groups


# -- differential testing ----------------------------------------------------------------

@dataclass
class DiffReport:
    program_id: str
    strings_tested: int = 0
    subformulas: int = 0
    checks: int = 0
    disagreements: int = 0
    max_deviation: float = 0.0
    counterexample: dict | None = None
    failing_strings: list = field(default_factory=list)  # in input order

    @property
    def ok(self) -> bool:
        return self.disagreements == 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1)

    def summary(self) -> str:
        return (f"{self.program_id}: {self.strings_tested} strings, {self.checks} checks, "
                f"{self.disagreements} disagreements, max |activation - (+-1)| = "
                f"{self.max_deviation:.3g}")


def boolean_subformulas(f) -> list:
    return [g for g in walk(desugar(f)) if isinstance(g, (Atom, Top, Not, And, Leq,
                                                         LinearComparison))]


def diff_test(f, model: TransformerModel, strings, program_id: str = "formula",
              chunk: int = 4096) -> DiffReport:
    """Compare every simulated subformula pair against the interpreter at every position.

    The pair of ``psi`` at column ``i`` must read true (odd < even) exactly
    when ``psi`` holds at position ``i``; column 0 (BOS) must read false.
    """
    f = desugar(f)
    nodes = boolean_subformulas(f)
    keys = [pretty(g) for g in nodes]
    for key in keys:
        if key not in model.dim_map:
            raise KeyError(f"model has no dimensions for subformula {key!r}")
    rows = [model.pair(k) for k in keys]
    odd = np.array([o for o, _ in rows])
    even = np.array([e for _, e in rows])
    strings = list(strings)
    report = DiffReport(program_id, len(strings), len(nodes))
    failing = set()
    first = None
    order = {w: k for k, w in enumerate(strings)}
    for n, words in sorted(by_length(strings).items()):
        for start in range(0, len(words), chunk):
            batch = words[start:start + chunk]
            A = forward_batch(model, batch)
            ev = Evaluator(batch)
            truth = np.stack([ev.formula(g) for g in nodes], axis=1)  # (B, S, n)
            got = A[:, even, :] > A[:, odd, :]  # (B, S, n + 1)
            bos_bad = got[:, :, 0]
            bad = got[:, :, 1:] != truth
            report.checks += bad.size + bos_bad.size
            report.disagreements += int(bad.sum() + bos_bad.sum())
            dev = np.abs(np.abs(A[:, np.concatenate([odd, even]), :]) - 1.0)
            report.max_deviation = max(report.max_deviation, float(dev.max(initial=0.0)))
            for b in np.flatnonzero(bad.any(axis=(1, 2)) | bos_bad.any(axis=1)):
                w = batch[b]
                failing.add(w)
                if first is None or order[w] < order[first["string"]]:
                    if bos_bad[b].any():
                        s = int(np.flatnonzero(bos_bad[b])[0])
                        pos, expected = 0, False
                    else:
                        s, p = (int(x) for x in np.argwhere(bad[b])[0])
                        pos, expected = p + 1, bool(truth[b, s, p])
                    first = {"string": w, "subformula": keys[s], "position": pos,
                             "expected": expected, "got": not expected}
    report.counterexample = first
    report.failing_strings = sorted(failing, key=order.get)
    return report


# -- independent brute-force evaluators -------------------------------------------------------

def naive_eval(node, w: str, i: int):
    """Direct recursive semantics, recounting prefixes from scratch (slow but independent)."""
    if isinstance(node, Atom):
        return w[i - 1] == node.symbol
    if isinstance(node, Top):
        return True
    if isinstance(node, Not):
        return not naive_eval(node.arg, w, i)
    if isinstance(node, And):
        return naive_eval(node.left, w, i) and naive_eval(node.right, w, i)
    if isinstance(node, Or):
        return naive_eval(node.left, w, i) or naive_eval(node.right, w, i)
    if isinstance(node, Leq):
        return naive_eval(node.left, w, i) <= naive_eval(node.right, w, i)
    if isinstance(node, Lt):
        return naive_eval(node.left, w, i) < naive_eval(node.right, w, i)
    if isinstance(node, Eq):
        return naive_eval(node.left, w, i) == naive_eval(node.right, w, i)
    if isinstance(node, LinearComparison):
        return sum(c * naive_eval(Count(b), w, i) for c, b in node.terms) + node.constant >= 0
    if isinstance(node, Count):
        return sum(1 for j in range(1, i + 1) if naive_eval(node.body, w, j))
    if isinstance(node, One):
        return 1
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Position):
        return i
    if isinstance(node, Add):
        return naive_eval(node.left, w, i) + naive_eval(node.right, w, i)
    if isinstance(node, Sub):
        return naive_eval(node.left, w, i) - naive_eval(node.right, w, i)
    raise TypeError(f"unknown node {node!r}")


def naive_foc_holds(nf: FocNormalForm, w: str) -> bool:
    """Count witnesses over the whole word, then check every linear constraint."""
    values = {var: sum(1 for p in range(1, len(w) + 1) if naive_eval(body, w, p))
              for var, body in nf.counted}
    return all(sum(c * values[v] for c, v in lc.terms) + lc.constant >= 0
               for lc in nf.constraints)


def binary_count_oracle(p: P.CraspProgram, name: str, w: str) -> list[int]:
    """Count vector of a ``#2`` operation by an explicit double loop over ``(i, j)``."""
    op = p.op(name)
    vals = {k: v[0] for k, v in run_crasp_batch(p, [w]).items()}

    def value(ref, pos):
        if isinstance(ref, Atom):
            return w[pos] == ref.symbol
        if isinstance(ref, Top):
            return True
        return bool(vals[ref][pos])

    def body(expr, i, j):
        if isinstance(expr, P.At):
            return value(expr.name, i if expr.pos == "i" else j)
        if isinstance(expr, P.BNot):
            return not body(expr.arg, i, j)
        if isinstance(expr, P.BAnd):
            return body(expr.left, i, j) and body(expr.right, i, j)
        return body(expr.left, i, j) or body(expr.right, i, j)

    return [sum(1 for j in range(i + 1) if body(op.body, i, j)) for i in range(len(w))]


# -- fuzzers ------------------------------------------------------------------------

def random_formula(rng: random.Random, alphabet, depth: int = 3, size: int = 4) -> Formula:
    """Random formula of modal depth at most ``depth`` (with sugar)."""
    def formula(md, budget):
        options = ["atom", "top"]
        if budget > 0:
            options += ["not", "and", "or"]
        if md > 0:
            options += ["cmp", "cmp", "cmp"]
        kind = rng.choice(options)
        if kind == "atom":
            return Atom(rng.choice(alphabet))
        if kind == "top":
            return Top()
        if kind == "not":
            return Not(formula(md, budget - 1))
        if kind in ("and", "or"):
            node = And if kind == "and" else Or
            return node(formula(md, budget // 2), formula(md, budget // 2))
        rel = rng.choice([Leq, Lt, Eq])
        return rel(term(md, budget // 2), term(md, budget // 2))

    def term(md, budget):
        options = ["count", "count", "num", "pos"]
        if budget > 0:
            options += ["add", "sub"]
        kind = rng.choice(options)
        if kind == "count":
            return Count(formula(md - 1, budget))
        if kind == "num":
            return Num(rng.randint(0, 3))
        if kind == "pos":
            return Position()
        node = Add if kind == "add" else Sub
        return node(term(md, budget // 2), term(md, budget // 2))

    return formula(depth, size)


def random_core_formula(rng: random.Random, alphabet, depth: int = 3, size: int = 4) -> Formula:
    return desugar(random_formula(rng, alphabet, depth, size))


def random_crasp(rng: random.Random, alphabet, max_ops: int = 8) -> P.CraspProgram:
    """Random valid program with at most ``max_ops`` operations, ending in a Boolean one."""
    n_ops = rng.randint(1, max_ops)
    ops: list = []
    bools: list = []
    counts: list = []

    def bref():
        pool = [Atom(a) for a in alphabet] + bools
        return rng.choice(pool)

    for k in range(n_ops):
        last = k == n_ops - 1
        kinds = ["initial", "not", "and", "or", "const_bool", "counting", "const_count"]
        if counts:
            kinds += ["compare", "compare", "conditional", "add", "sub", "min", "max"]
        if last:
            kinds = [x for x in kinds if x in ("initial", "not", "and", "or", "compare",
                                              "const_bool")]
        kind = rng.choice(kinds)
        if last and counts and rng.random() < 0.6:
            kind = "compare"
        cref = lambda: rng.choice(counts) if counts and rng.random() < 0.8 else rng.randint(0, 3)  # noqa: E731
        if kind == "initial":
            op = P.Initial(rng.choice(alphabet))
        elif kind == "not":
            op = P.BoolNot(bref())
        elif kind == "and":
            op = P.BoolAnd(bref(), bref())
        elif kind == "or":
            op = P.BoolOr(bref(), bref())
        elif kind == "const_bool":
            op = P.BoolConst()
        elif kind == "compare":
            op = P.Compare(cref(), rng.choice(P.RELATIONS), cref())
        elif kind == "counting":
            op = P.Counting(bref() if rng.random() < 0.9 else Top())
        elif kind == "const_count":
            op = P.CountConst(rng.randint(0, 3))
        elif kind == "conditional":
            op = P.Conditional(bref(), rng.choice(counts), rng.choice(counts))
        else:
            node = {"add": P.CountAdd, "sub": P.CountSub, "min": P.CountMin,
                    "max": P.CountMax}[kind]
            op = node(rng.choice(counts), rng.choice(counts))
        name = f"{'P' if P.is_boolean(op) else 'C'}{k}"
        (bools if P.is_boolean(op) else counts).append(name)
        ops.append((name, op))
    return P.CraspProgram(tuple(alphabet), tuple(ops))


def random_binary_body(rng: random.Random, refs: list, size: int = 3):
    if size <= 0 or rng.random() < 0.3:
        return P.At(rng.choice(refs), rng.choice("ij"))
    kind = rng.choice(["not", "and", "or"])
    if kind == "not":
        return P.BNot(random_binary_body(rng, refs, size - 1))
    node = P.BAnd if kind == "and" else P.BOr
    return node(random_binary_body(rng, refs, size - 1), random_binary_body(rng, refs, size - 1))


def random_binary_program(rng: random.Random, alphabet, max_ops: int = 6) -> P.CraspProgram:
    """A random program whose count ``X`` is a ``#2[j <= i]`` operation, read by the final op."""
    base = random_crasp(rng, alphabet, max_ops)
    bools = [n for n, op in base.ops if P.is_boolean(op)]
    refs = bools + [Atom(a) for a in alphabet]
    body = random_binary_body(rng, refs, rng.randint(1, 4))
    ops = list(base.ops) + [("X", P.BinaryCounting(body)),
                            ("Y", P.Compare("X", rng.choice(P.RELATIONS), rng.randint(0, 3)))]
    return P.CraspProgram(tuple(alphabet), tuple(ops))


def random_foc(rng: random.Random, alphabet, max_vars: int = 3) -> FocNormalForm:
    n = rng.randint(1, max_vars)
    counted = tuple((f"x{k}", random_formula(rng, alphabet, 0, 2)) for k in range(n))
    constraints = []
    for _ in range(rng.randint(1, 2)):
        terms = tuple((c, v) for v, _ in counted if (c := rng.randint(-2, 2)) != 0)
        constraints.append(LinearComparison(terms, rng.randint(-3, 3)))
    return FocNormalForm(tuple(alphabet), counted, tuple(constraints))
