"""Abstract syntax for Kt[#] formulas and count terms.

Formulas and count terms are immutable trees of frozen dataclasses.  Each node
caches its structural hash at construction, so hashing and dictionary lookups
stay O(1) even when a tree is shared heavily (translations from C-RASP rely on
that sharing).

Core constructors::

    Formula   ::= Atom(a) | Not(F) | And(F, F) | Leq(C, C) | Top()
    CountTerm ::= Count(F) | Add(C, C) | Sub(C, C) | One()

Sugar constructors (removed by :func:`desugar`)::

    Or(F, F), Lt(C, C), Eq(C, C), Num(n), Position()

:class:`LinearComparison` is the normalized comparison form used by the
compiler: ``sum(coef * #[body]) + constant >= 0``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Union


def _node(cls):
    """Make ``cls`` a frozen dataclass with a cached structural hash."""
    name = cls.__name__

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash((name,) + tuple(
            getattr(self, f) for f in self.__dataclass_fields__ if f != "_hash")))

    def __hash__(self):
        return self._hash

    cls.__post_init__ = __post_init__
    cls = dataclass(frozen=True)(cls)
    cls.__hash__ = __hash__
    return cls


class Formula:
    """Base class of Boolean-valued nodes."""

    __slots__ = ()

    def __and__(self, other: "Formula") -> "Formula":
        return And(self, other)

    def __invert__(self) -> "Formula":
        return Not(self)

    def __or__(self, other: "Formula") -> "Formula":
        return Or(self, other)


class CountTerm:
    """Base class of integer-valued nodes."""

    __slots__ = ()

    def __add__(self, other: "CountTerm") -> "CountTerm":
        return Add(self, other)

    def __sub__(self, other: "CountTerm") -> "CountTerm":
        return Sub(self, other)


@_node
class Atom(Formula):
    symbol: str
    _hash: int = field(default=0, init=False, repr=False, compare=False)


@_node
class Not(Formula):
    arg: Formula
    _hash: int = field(default=0, init=False, repr=False, compare=False)


@_node
class And(Formula):
    left: Formula
    right: Formula
    _hash: int = field(default=0, init=False, repr=False, compare=False)


@_node
class Leq(Formula):
    left: CountTerm
    right: CountTerm
    _hash: int = field(default=0, init=False, repr=False, compare=False)


@_node
class Top(Formula):
    _hash: int = field(default=0, init=False, repr=False, compare=False)


@_node
class Count(CountTerm):
    body: Formula
    _hash: int = field(default=0, init=False, repr=False, compare=False)


@_node
class Add(CountTerm):
    left: CountTerm
    right: CountTerm
    _hash: int = field(default=0, init=False, repr=False, compare=False)


@_node
class Sub(CountTerm):
    left: CountTerm
    right: CountTerm
    _hash: int = field(default=0, init=False, repr=False, compare=False)


@_node
class One(CountTerm):
    _hash: int = field(default=0, init=False, repr=False, compare=False)


# -- sugar ---------------------------------------------------------------

@_node
class Or(Formula):
    left: Formula
    right: Formula
    _hash: int = field(default=0, init=False, repr=False, compare=False)


@_node
class Lt(Formula):
    left: CountTerm
    right: CountTerm
    _hash: int = field(default=0, init=False, repr=False, compare=False)


@_node
class Eq(Formula):
    left: CountTerm
    right: CountTerm
    _hash: int = field(default=0, init=False, repr=False, compare=False)


@_node
class Num(CountTerm):
    value: int
    _hash: int = field(default=0, init=False, repr=False, compare=False)


@_node
class Position(CountTerm):
    _hash: int = field(default=0, init=False, repr=False, compare=False)


@_node
class LinearComparison(Formula):
    """``sum(coef * #[body] for coef, body in terms) + constant >= 0``.

    ``terms`` is a tuple of ``(coefficient, body)`` pairs with nonzero
    coefficients and pairwise distinct bodies, sorted by first appearance.
    """

    terms: tuple
    constant: int
    _hash: int = field(default=0, init=False, repr=False, compare=False)


Node = Union[Formula, CountTerm]

CORE_FORMULAS = (Atom, Not, And, Leq, Top)
CORE_TERMS = (Count, Add, Sub, One)

FALSE = Not(Top())
ZERO = Count(FALSE)


def children(node: Node) -> tuple:
    """Direct child nodes of ``node`` (formulas and count terms alike)."""
    if isinstance(node, (Not,)):
        return (node.arg,)
    if isinstance(node, (And, Or, Leq, Lt, Eq, Add, Sub)):
        return (node.left, node.right)
    if isinstance(node, Count):
        return (node.body,)
    if isinstance(node, LinearComparison):
        return tuple(Count(body) for _, body in node.terms)
    return ()


def walk(node: Node) -> Iterator[Node]:
    """Post-order traversal yielding each structurally distinct node once."""
    seen = set()
    stack = [(node, False)]
    while stack:
        current, expanded = stack.pop()
        if expanded:
            if current not in seen:
                seen.add(current)
                yield current
            continue
        if current in seen:
            continue
        stack.append((current, True))
        for child in reversed(children(current)):
            if child not in seen:
                stack.append((child, False))


def subformulas(f: Formula) -> list[Formula]:
    """Distinct Boolean subformulas of ``f`` in post-order (children first)."""
    return [n for n in walk(f) if isinstance(n, Formula)]


def atoms(node: Node) -> set[str]:
    return {n.symbol for n in walk(node) if isinstance(n, Atom)}


def num(n: int) -> CountTerm:
    """Core term for the natural number ``n``: ``0`` is ``#[!T]``, else a sum of ones."""
    if n < 0:
        raise ValueError(f"natural constant expected, got {n}")
    if n == 0:
        return ZERO
    term: CountTerm = One()
    for _ in range(n - 1):
        term = Add(term, One())
    return term


def disj(a: Formula, b: Formula) -> Formula:
    """Core encoding of ``a | b`` (De Morgan)."""
    return Not(And(Not(a), Not(b)))


def conj_all(parts: list[Formula]) -> Formula:
    if not parts:
        return Top()
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def disj_all(parts: list[Formula]) -> Formula:
    if not parts:
        return FALSE
    out = parts[0]
    for p in parts[1:]:
        out = disj(out, p)
    return out


def desugar(node: Node, _memo: dict | None = None) -> Node:
    """Rewrite sugar into core constructors.

    ``n`` becomes ``1+...+1`` (``0`` is ``#[!T]``), the position term ``i``
    becomes ``#[T]``, ``C1 < C2`` becomes ``!(C2 <= C1)``, ``C1 = C2`` becomes
    both inequalities and ``|`` goes through De Morgan.
    """
    memo = {} if _memo is None else _memo
    if node in memo:
        return memo[node]
    d = lambda x: desugar(x, memo)  # noqa: E731
    if isinstance(node, (Atom, Top, One)):
        out = node
    elif isinstance(node, Not):
        out = Not(d(node.arg))
    elif isinstance(node, And):
        out = And(d(node.left), d(node.right))
    elif isinstance(node, Or):
        out = disj(d(node.left), d(node.right))
    elif isinstance(node, Leq):
        out = Leq(d(node.left), d(node.right))
    elif isinstance(node, Lt):
        out = Not(Leq(d(node.right), d(node.left)))
    elif isinstance(node, Eq):
        left, right = d(node.left), d(node.right)
        out = And(Leq(left, right), Leq(right, left))
    elif isinstance(node, Count):
        out = Count(d(node.body))
    elif isinstance(node, Add):
        out = Add(d(node.left), d(node.right))
    elif isinstance(node, Sub):
        out = Sub(d(node.left), d(node.right))
    elif isinstance(node, Num):
        out = num(node.value)
    elif isinstance(node, Position):
        out = Count(Top())
    elif isinstance(node, LinearComparison):
        out = LinearComparison(tuple((c, d(b)) for c, b in node.terms), node.constant)
    else:
        raise TypeError(f"not a syntax node: {node!r}")
    memo[node] = out
    return out


def is_core(node: Node) -> bool:
    return all(isinstance(n, CORE_FORMULAS + CORE_TERMS + (LinearComparison,))
               for n in walk(node))


def modal_depth(node: Node, _memo: dict | None = None) -> int:
    """Maximum nesting of counting operators ``#[...]``."""
    memo = {} if _memo is None else _memo
    if node in memo:
        return memo[node]
    if isinstance(node, Count):
        out = 1 + modal_depth(node.body, memo)
    elif isinstance(node, Position) or node == Num(0):  # i is #[T], 0 is #[!T]
        out = 1
    elif isinstance(node, LinearComparison):
        out = max((1 + modal_depth(b, memo) for _, b in node.terms), default=0)
    else:
        out = max((modal_depth(c, memo) for c in children(node)), default=0)
    memo[node] = out
    return out


def linear_form(term: CountTerm) -> tuple[dict, int]:
    """Flatten a core count term into ``({body: coefficient}, constant)``."""
    coefs: dict = {}
    const = 0
    stack = [(term, 1)]
    while stack:
        t, sign = stack.pop()
        if isinstance(t, Count):
            coefs[t.body] = coefs.get(t.body, 0) + sign
        elif isinstance(t, One):
            const += sign
        elif isinstance(t, Add):
            stack.append((t.right, sign))
            stack.append((t.left, sign))
        elif isinstance(t, Sub):
            stack.append((t.right, -sign))
            stack.append((t.left, sign))
        elif isinstance(t, Num):
            const += sign * t.value
        elif isinstance(t, Position):
            coefs[Top()] = coefs.get(Top(), 0) + sign
        else:
            raise TypeError(f"not a count term: {t!r}")
    return coefs, const


def linear_comparison(leq: Leq) -> LinearComparison:
    """``C1 <= C2`` as ``(C2 - C1) >= 0`` with equal bodies merged and constants folded."""
    right, c_right = linear_form(leq.right)
    left, c_left = linear_form(leq.left)
    merged: dict = {}
    for body, coef in right.items():
        merged[body] = merged.get(body, 0) + coef
    for body, coef in left.items():
        merged[body] = merged.get(body, 0) - coef
    terms = tuple((coef, body) for body, coef in merged.items() if coef != 0)
    return LinearComparison(terms, c_right - c_left)


def normalize_comparison(f: Formula, _memo: dict | None = None) -> Formula:
    """Replace every ``Leq`` node (including nested ones) by a :class:`LinearComparison`."""
    memo = {} if _memo is None else _memo
    if f in memo:
        return memo[f]
    n = lambda x: normalize_comparison(x, memo)  # noqa: E731
    if isinstance(f, (Atom, Top)):
        out = f
    elif isinstance(f, Not):
        out = Not(n(f.arg))
    elif isinstance(f, And):
        out = And(n(f.left), n(f.right))
    elif isinstance(f, Leq):
        lc = linear_comparison(f)
        out = LinearComparison(tuple((c, n(b)) for c, b in lc.terms), lc.constant)
    elif isinstance(f, LinearComparison):
        out = LinearComparison(tuple((c, n(b)) for c, b in f.terms), f.constant)
    else:
        raise TypeError(f"normalize_comparison expects a desugared formula, got {type(f).__name__}")
    memo[f] = out
    return out


# -- canonical DNF ---------------------------------------------------------

DEFAULT_LITERAL_CAP = 16


class LiteralCapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class DnfSkeleton:
    """Mutually exclusive clauses over input literals.

    ``literals`` names the inputs; each clause is a tuple of
    ``(literal_index, positive)`` pairs.
    """

    literals: tuple
    clauses: tuple

    def evaluate(self, assignment) -> bool:
        return any(all(assignment[k] == pos for k, pos in clause) for clause in self.clauses)


def to_canonical_dnf(expr: Formula, leaves=None, cap: int = DEFAULT_LITERAL_CAP) -> DnfSkeleton:
    """Canonical (minterm) DNF of a Boolean expression.

    ``leaves`` are the nodes treated as opaque input literals; by default every
    node that is not ``Not``/``And``/``Or``/``Top``.  Each clause is a full
    minterm over the leaves the expression mentions, so at most one clause is
    true under any assignment.
    """
    if leaves is None:
        leaves = _default_leaves(expr)
    leaves = tuple(leaves)
    if len(leaves) > cap:
        raise LiteralCapExceeded(f"{len(leaves)} literals exceed the cap of {cap}")
    index = {leaf: k for k, leaf in enumerate(leaves)}
    clauses = []
    for bits in itertools.product((True, False), repeat=len(leaves)):
        if _eval_skeleton(expr, index, bits):
            clauses.append(tuple((k, b) for k, b in enumerate(bits)))
    return DnfSkeleton(leaves, tuple(clauses))


def _default_leaves(expr: Formula) -> list:
    out: list = []
    stack = [expr]
    while stack:
        e = stack.pop()
        if isinstance(e, Not):
            stack.append(e.arg)
        elif isinstance(e, (And, Or)):
            stack.extend((e.right, e.left))
        elif isinstance(e, Top):
            continue
        elif e not in out:
            out.append(e)
    return out


def _eval_skeleton(expr: Formula, index: dict, bits) -> bool:
    if expr in index:
        return bits[index[expr]]
    if isinstance(expr, Not):
        return not _eval_skeleton(expr.arg, index, bits)
    if isinstance(expr, And):
        return _eval_skeleton(expr.left, index, bits) and _eval_skeleton(expr.right, index, bits)
    if isinstance(expr, Or):
        return _eval_skeleton(expr.left, index, bits) or _eval_skeleton(expr.right, index, bits)
    if isinstance(expr, Top):
        return True
    raise KeyError(f"leaf not declared: {expr!r}")


# -- printing ---------------------------------------------------------------

def pretty(node: Node) -> str:
    """Concrete syntax that :func:`ktsharp.parsing.parse_kt` reads back to the same tree.

    Binary operators are left-associative; a right operand of the same
    precedence is parenthesized.  Sugar nodes print in their sugared form.
    """
    return _pp(node)


def _pp(node: Node) -> str:
    if isinstance(node, Atom):
        return f"Q_{node.symbol}"
    if isinstance(node, Top):
        return "T"
    if isinstance(node, Not):
        return "!" + _pp_unary(node.arg)
    if isinstance(node, And):
        return f"{_pp_and(node.left)} & {_pp_unary(node.right)}"
    if isinstance(node, Or):
        return f"{_pp_or(node.left)} | {_pp_and_operand(node.right)}"
    if isinstance(node, Leq):
        return f"{_pp_term(node.left)} <= {_pp_term(node.right)}"
    if isinstance(node, Lt):
        return f"{_pp_term(node.left)} < {_pp_term(node.right)}"
    if isinstance(node, Eq):
        return f"{_pp_term(node.left)} = {_pp_term(node.right)}"
    if isinstance(node, LinearComparison):
        return _pp_linear(node)
    return _pp_term(node)


def _pp_unary(f: Formula) -> str:
    if isinstance(f, (Atom, Top, Not)):
        return _pp(f)
    return f"({_pp(f)})"


def _pp_and(f: Formula) -> str:
    if isinstance(f, And):
        return _pp(f)
    return _pp_unary(f)


def _pp_and_operand(f: Formula) -> str:
    return _pp(f) if isinstance(f, And) else _pp_unary(f)


def _pp_or(f: Formula) -> str:
    return _pp(f) if isinstance(f, (Or, And)) else _pp_unary(f)


def _pp_term(t: CountTerm) -> str:
    if isinstance(t, Count):
        return f"#[{_pp(t.body)}]"
    if isinstance(t, One):
        return "1"
    if isinstance(t, Num):
        return str(t.value)
    if isinstance(t, Position):
        return "i"
    if isinstance(t, (Add, Sub)):
        op = "+" if isinstance(t, Add) else "-"
        right = _pp_term(t.right)
        if isinstance(t.right, (Add, Sub)):
            right = f"({right})"
        return f"{_pp_term(t.left)} {op} {right}"
    raise TypeError(f"not a count term: {t!r}")


def _pp_linear(lc: LinearComparison) -> str:
    parts = []
    for coef, body in lc.terms:
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        parts.append(f"{sign} {'' if mag == 1 else f'{mag}*'}#[{_pp(body)}]")
    if lc.constant or not parts:
        parts.append(f"{'-' if lc.constant < 0 else '+'} {abs(lc.constant)}")
    text = " ".join(parts)
    if text.startswith("+ "):
        text = text[2:]
    return f"[{text} >= 0]"
