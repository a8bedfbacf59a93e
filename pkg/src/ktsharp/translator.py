"""Translations between Kt[#] formulas and C-RASP programs.

* :func:`kt_to_crasp` emits one operation per distinct subformula or subterm.
* :func:`crasp_to_kt` eliminates conditionals, min and max by case splitting.
  Every count operation becomes a list of guarded terms ``(guard, term)``:
  at each position at least one guard holds, and every term whose guard
  holds has the operation's value there.  A comparison is then the
  disjunction, over pairs of cases, of both guards and the comparison of the
  two terms.
* :func:`desugar_binary_count` rewrites ``#2[j <= i] F(i, j)`` into ordinary
  counting via DNF, inclusion-exclusion and factoring out the ``i`` literals.
* :func:`foc_nf_to_kt` embeds a counting normal form as a depth-1 formula.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from . import program as P
from .syntax import (ZERO, Add, And, Atom, Count, Eq, Leq, Lt, Not,
                     Num, One, Or, Position, Sub, Top, desugar, modal_depth, num)


class TranslationError(ValueError):
    pass


# -- Kt[#] -> C-RASP -----------------------------------------------------------

class _Emitter:
    def __init__(self):
        self.ops: list = []
        self.names: dict = {}

    def emit(self, key, op, prefix: str) -> str:
        if key in self.names:
            return self.names[key]
        name = f"{prefix}{len(self.ops) + 1}"
        self.ops.append((name, op))
        self.names[key] = name
        return name


def _const_value(c):
    """Integer value of a position-independent term, else ``None``."""
    if isinstance(c, One):
        return 1
    if isinstance(c, Num):
        return c.value
    if c == ZERO:
        return 0
    if isinstance(c, (Add, Sub)):
        left, right = _const_value(c.left), _const_value(c.right)
        if left is None or right is None:
            return None
        return left + right if isinstance(c, Add) else left - right
    return None


def kt_to_crasp(f, alphabet) -> P.CraspProgram:
    """C-RASP program whose final operation computes ``f`` at every position."""
    em = _Emitter()

    def bref(g):
        if isinstance(g, (Atom, Top)):
            return g
        return bool_op(g)

    def bool_op(g) -> str:
        if g in em.names:
            return em.names[g]
        if isinstance(g, Atom):
            op = P.Initial(g.symbol)
        elif isinstance(g, Top):
            op = P.BoolConst()
        elif isinstance(g, Not) and isinstance(g.arg, Leq):
            # !(C2 <= C1) is C1 < C2
            op = P.Compare(cref(g.arg.right), "<", cref(g.arg.left))
        elif isinstance(g, Not):
            op = P.BoolNot(bref(g.arg))
        elif (isinstance(g, And) and isinstance(g.left, Leq) and isinstance(g.right, Leq)
              and g.left.left == g.right.right and g.left.right == g.right.left):
            op = P.Compare(cref(g.left.left), "=", cref(g.left.right))
        elif isinstance(g, And):
            op = P.BoolAnd(bref(g.left), bref(g.right))
        elif isinstance(g, Or):
            op = P.BoolOr(bref(g.left), bref(g.right))
        elif isinstance(g, Leq):
            op = P.Compare(cref(g.left), "<=", cref(g.right))
        elif isinstance(g, Lt):
            op = P.Compare(cref(g.left), "<", cref(g.right))
        elif isinstance(g, Eq):
            op = P.Compare(cref(g.left), "=", cref(g.right))
        else:
            raise TranslationError(f"cannot translate {type(g).__name__}")
        return em.emit(g, op, "P")

    def cref(c):
        value = _const_value(c)
        if value is not None and value >= 0:
            return value
        return count_op(c)

    def count_op(c) -> str:
        if c in em.names:
            return em.names[c]
        value = _const_value(c)
        if value is not None and value >= 0:
            return em.emit(("const", value), P.CountConst(value), "C")
        if isinstance(c, Count):
            op = P.Counting(bref(c.body))
        elif isinstance(c, Position):
            op = P.Counting(Top())
        elif isinstance(c, Add):
            op = P.CountAdd(count_op(c.left), count_op(c.right))
        elif isinstance(c, Sub):
            op = P.CountSub(count_op(c.left), count_op(c.right))
        else:
            raise TranslationError(f"cannot translate {type(c).__name__}")
        return em.emit(c, op, "C")

    bool_op(f)
    return P.CraspProgram(tuple(alphabet), tuple(em.ops))


# -- C-RASP -> Kt[#] -----------------------------------------------------------

def _conj(*parts):
    parts = [p for p in parts if not isinstance(p, Top)]
    if not parts:
        return Top()
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def _rel(left, rel: str, right):
    if rel == "<=":
        return Leq(left, right)
    if rel == ">=":
        return Leq(right, left)
    if rel == "<":
        return Lt(left, right)
    if rel == ">":
        return Lt(right, left)
    return Eq(left, right)


def crasp_to_kt(p: P.CraspProgram):
    """A core formula end-satisfied by exactly the words ``p`` accepts."""
    if any(isinstance(op, P.BinaryCounting) for _, op in p.ops):
        p = desugar_binary_count(p)
    formulas: dict = {}
    cases: dict = {}

    def fb(ref):
        return ref if isinstance(ref, (Atom, Top)) else formulas[ref]

    def fc(ref):
        return [(Top(), Num(ref))] if isinstance(ref, int) else cases[ref]

    for name, op in p.ops:
        if isinstance(op, P.Initial):
            formulas[name] = Atom(op.symbol)
        elif isinstance(op, P.BoolConst):
            formulas[name] = Top()
        elif isinstance(op, P.BoolNot):
            formulas[name] = Not(fb(op.arg))
        elif isinstance(op, P.BoolAnd):
            formulas[name] = And(fb(op.left), fb(op.right))
        elif isinstance(op, P.BoolOr):
            formulas[name] = Or(fb(op.left), fb(op.right))
        elif isinstance(op, P.Compare):
            disjuncts = [_conj(g1, g2, _rel(t1, op.rel, t2))
                         for (g1, t1), (g2, t2) in itertools.product(fc(op.left), fc(op.right))]
            out = disjuncts[0]
            for d in disjuncts[1:]:
                out = Or(out, d)
            formulas[name] = out
        elif isinstance(op, P.Counting):
            cases[name] = [(Top(), Count(fb(op.body)))]
        elif isinstance(op, P.CountConst):
            cases[name] = [(Top(), Num(op.value))]
        elif isinstance(op, P.Conditional):
            cond = fb(op.cond)
            cases[name] = ([(_conj(g, cond), t) for g, t in cases[op.then]]
                           + [(_conj(g, Not(cond)), t) for g, t in cases[op.orelse]])
        elif isinstance(op, (P.CountAdd, P.CountSub)):
            combine = Add if isinstance(op, P.CountAdd) else Sub
            cases[name] = [(_conj(g1, g2), combine(t1, t2))
                           for (g1, t1), (g2, t2) in itertools.product(cases[op.left],
                                                                       cases[op.right])]
        elif isinstance(op, (P.CountMin, P.CountMax)):
            out = []
            for (g1, t1), (g2, t2) in itertools.product(cases[op.left], cases[op.right]):
                if isinstance(op, P.CountMin):
                    out.append((_conj(g1, g2, Leq(t1, t2)), t1))
                    out.append((_conj(g1, g2, Leq(t2, t1)), t2))
                else:
                    out.append((_conj(g1, g2, Leq(t2, t1)), t1))
                    out.append((_conj(g1, g2, Leq(t1, t2)), t2))
            cases[name] = out
        else:
            raise TranslationError(f"{name}: cannot translate {type(op).__name__}")
    return desugar(formulas[p.output])


# -- binary counting -------------------------------------------------------------

def _nnf_dnf(expr, positive: bool = True) -> list[frozenset]:
    """DNF clauses (sets of ``(At, polarity)`` literals) of a binary counting body."""
    if isinstance(expr, P.At):
        return [frozenset({(expr, positive)})]
    if isinstance(expr, P.BNot):
        return _nnf_dnf(expr.arg, not positive)
    left = _nnf_dnf(expr.left, positive)
    right = _nnf_dnf(expr.right, positive)
    conjunctive = isinstance(expr, P.BAnd) == positive
    if not conjunctive:
        return list(dict.fromkeys(left + right))
    return list(dict.fromkeys(a | b for a in left for b in right))


def _consistent(clause: frozenset) -> bool:
    return not any((lit, not pos) in clause for lit, pos in clause)


class _Builder:
    def __init__(self, prefix: str, taken: set):
        self.prefix = prefix
        self.taken = taken
        self.ops: list = []
        self.memo: dict = {}

    def emit(self, key, op) -> str:
        if key in self.memo:
            return self.memo[key]
        k = len(self.ops) + 1
        name = f"{self.prefix}_{k}"
        while name in self.taken:
            k += 1
            name = f"{self.prefix}_{k}"
        self.taken.add(name)
        self.ops.append((name, op))
        self.memo[key] = name
        return name

    def literal(self, lit, positive: bool):
        ref = lit.name
        if positive:
            return ref
        return self.emit(("not", ref), P.BoolNot(ref))

    def conjunction(self, literals: list):
        literals = sorted(literals, key=repr)
        if not literals:
            return Top()
        out = self.literal(*literals[0])
        for k in range(1, len(literals)):
            right = self.literal(*literals[k])
            out = self.emit(("and", out, right), P.BoolAnd(out, right))
        return out

    def zero(self) -> str:
        return self.emit(("zero",), P.CountConst(0))

    def factor(self, clause: frozenset) -> str:
        """``#2[F_i & G_j]`` as ``if F(i) then #[G] else 0``."""
        i_part = [(lit, pos) for lit, pos in clause if lit.pos == "i"]
        j_part = [(lit, pos) for lit, pos in clause if lit.pos == "j"]
        body = self.conjunction(j_part)
        counted = self.emit(("count", body), P.Counting(body))
        if not i_part:
            return counted
        cond = self.conjunction(i_part)
        return self.emit(("if", cond, counted), P.Conditional(cond, counted, self.zero()))

    def count(self, clauses: tuple) -> str:
        """Inclusion-exclusion: ``#(c1 | rest) = #c1 + #rest - #(c1 & rest)``."""
        clauses = tuple(c for c in clauses if _consistent(c))
        key = ("ie", clauses)
        if key in self.memo:
            return self.memo[key]
        if not clauses:
            out = self.zero()
        elif len(clauses) == 1:
            out = self.factor(clauses[0])
        else:
            first, rest = clauses[0], clauses[1:]
            c1 = self.count((first,))
            c2 = self.count(rest)
            c3 = self.count(tuple(dict.fromkeys(first | c for c in rest)))
            total = self.emit(("add", c1, c2), P.CountAdd(c1, c2))
            out = self.emit(("sub", total, c3), P.CountSub(total, c3))
        self.memo[key] = out
        return out


def desugar_binary_count(p: P.CraspProgram) -> P.CraspProgram:
    """Replace every ``#2[j <= i]`` operation with ordinary C-RASP operations."""
    taken = set(p.names)
    ops = []
    for name, op in p.ops:
        if not isinstance(op, P.BinaryCounting):
            ops.append((name, op))
            continue
        b = _Builder(name, taken)
        clauses = tuple(_nnf_dnf(op.body))
        result = b.count(clauses)
        last_name, last_op = b.ops[-1]
        if last_name == result:
            b.ops[-1] = (name, last_op)
        else:
            b.ops.append((name, P.CountAdd(result, b.zero())))
        ops.extend(b.ops)
    return P.CraspProgram(p.alphabet, tuple(ops))


# -- FOC[+] normal form --------------------------------------------------------------

@dataclass(frozen=True)
class FocNormalForm:
    """Counted variables ``x_k`` (with depth-0 bodies) and linear constraints over them.

    Each constraint is a :class:`LinearComparison` whose ``terms`` pair integer
    coefficients with variable names; the sentence is their conjunction.
    """

    alphabet: tuple
    counted: tuple  # of (variable, body)
    constraints: tuple


def _scaled(count, k: int):
    out = count
    for _ in range(k - 1):
        out = Add(out, count)
    return out


def _side(parts: list, constant: int):
    out = None
    for part in parts:
        out = part if out is None else Add(out, part)
    if out is None:
        return num(constant) if constant else ZERO
    return Add(out, num(constant)) if constant else out


def foc_nf_to_kt(nf: FocNormalForm):
    """Substitute ``#[psi_k]`` for every ``x_k``; the result has modal depth 1."""
    bodies = dict(nf.counted)
    parts = []
    for lc in nf.constraints:
        left, right = [], []
        for coef, var in lc.terms:
            if var not in bodies:
                raise TranslationError(f"constraint references unknown variable {var!r}")
            if modal_depth(bodies[var]) != 0:
                raise TranslationError(f"body of {var!r} must be quantifier-free")
            count = Count(desugar(bodies[var]))
            (right if coef > 0 else left).append(_scaled(count, abs(coef)))
        c = lc.constant
        parts.append(Leq(_side(left, max(-c, 0)), _side(right, max(c, 0))))
    if not parts:
        parts = [Leq(ZERO, ZERO)]
    out = parts[0]
    for part in parts[1:]:
        out = And(out, part)
    return desugar(out)


def foc_nf_holds(nf: FocNormalForm, w: str) -> bool:
    """Brute-force truth of the normal-form sentence on ``w`` (independent of Kt[#])."""
    from .interpreter import Evaluator

    ev = Evaluator(w)
    values = {var: int(ev.formula(body)[0].sum()) for var, body in nf.counted}
    for lc in nf.constraints:
        if sum(c * values[v] for c, v in lc.terms) + lc.constant < 0:
            return False
    return True


__all__ = ["TranslationError", "kt_to_crasp", "crasp_to_kt", "desugar_binary_count",
           "FocNormalForm", "foc_nf_to_kt", "foc_nf_holds"]
