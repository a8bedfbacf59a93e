"""C-RASP programs: ordered, named Boolean- and count-valued operations.

Boolean operands are either an earlier operation name (``str``), an inline
atom (:class:`~ktsharp.syntax.Atom`) or the constant :class:`~ktsharp.syntax.Top`.
Count operands of comparisons are names or natural-number constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .syntax import Atom, Top

BoolRef = Union[str, Atom, Top]
CountRef = Union[str, int]

RELATIONS = ("<=", "<", "=", ">=", ">")


class ProgramError(ValueError):
    """A program violates scoping, sort or acceptance rules."""


# -- Boolean-valued operations ---------------------------------------------

@dataclass(frozen=True)
class Initial:
    symbol: str


@dataclass(frozen=True)
class BoolNot:
    arg: BoolRef


@dataclass(frozen=True)
class BoolAnd:
    left: BoolRef
    right: BoolRef


@dataclass(frozen=True)
class BoolOr:
    left: BoolRef
    right: BoolRef


@dataclass(frozen=True)
class Compare:
    left: CountRef
    rel: str
    right: CountRef


@dataclass(frozen=True)
class BoolConst:
    pass


# -- count-valued operations -----------------------------------------------

@dataclass(frozen=True)
class Counting:
    body: BoolRef


@dataclass(frozen=True)
class Conditional:
    cond: BoolRef
    then: str
    orelse: str


@dataclass(frozen=True)
class CountAdd:
    left: str
    right: str


@dataclass(frozen=True)
class CountSub:
    left: str
    right: str


@dataclass(frozen=True)
class CountMin:
    left: str
    right: str


@dataclass(frozen=True)
class CountMax:
    left: str
    right: str


@dataclass(frozen=True)
class CountConst:
    value: int


# -- binary counting extension ---------------------------------------------

@dataclass(frozen=True)
class At:
    """Boolean operation ``name`` read at position ``i`` or ``j``."""
    name: BoolRef
    pos: str


@dataclass(frozen=True)
class BNot:
    arg: object


@dataclass(frozen=True)
class BAnd:
    left: object
    right: object


@dataclass(frozen=True)
class BOr:
    left: object
    right: object


@dataclass(frozen=True)
class BinaryCounting:
    """``#2[j <= i] F(i, j)`` where ``F`` is built from At/BNot/BAnd/BOr."""
    body: object


BOOL_OPS = (Initial, BoolNot, BoolAnd, BoolOr, Compare, BoolConst)
COUNT_OPS = (Counting, Conditional, CountAdd, CountSub, CountMin, CountMax, CountConst,
             BinaryCounting)


def is_boolean(op) -> bool:
    return isinstance(op, BOOL_OPS)


@dataclass(frozen=True)
class CraspProgram:
    alphabet: tuple
    ops: tuple  # of (name, op)
    _sorts: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(self, "ops", tuple((n, o) for n, o in self.ops))
        validate(self)

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.ops]

    @property
    def output(self) -> str:
        return self.ops[-1][0]

    def op(self, name: str):
        for n, o in self.ops:
            if n == name:
                return o
        raise KeyError(name)

    def sort(self, name: str) -> str:
        return "bool" if is_boolean(self.op(name)) else "count"

    def __len__(self) -> int:
        return len(self.ops)


def _bool_refs(op) -> list:
    if isinstance(op, BoolNot):
        return [op.arg]
    if isinstance(op, (BoolAnd, BoolOr)):
        return [op.left, op.right]
    if isinstance(op, Counting):
        return [op.body]
    if isinstance(op, Conditional):
        return [op.cond]
    if isinstance(op, BinaryCounting):
        return [a.name for a in binary_atoms(op.body)]
    return []


def _count_refs(op) -> list:
    if isinstance(op, Compare):
        return [r for r in (op.left, op.right) if isinstance(r, str)]
    if isinstance(op, Conditional):
        return [op.then, op.orelse]
    if isinstance(op, (CountAdd, CountSub, CountMin, CountMax)):
        return [op.left, op.right]
    return []


def binary_atoms(expr) -> list[At]:
    if isinstance(expr, At):
        return [expr]
    if isinstance(expr, BNot):
        return binary_atoms(expr.arg)
    if isinstance(expr, (BAnd, BOr)):
        return binary_atoms(expr.left) + binary_atoms(expr.right)
    raise ProgramError(f"malformed binary counting body: {expr!r}")


def validate(p: CraspProgram, *, require_boolean_output: bool = True) -> None:
    """Check unique names, define-before-use, sorts and the acceptance convention."""
    sorts: dict[str, str] = {}
    alphabet = set(p.alphabet)
    for name, op in p.ops:
        if name in sorts:
            raise ProgramError(f"duplicate operation name {name!r}")
        if isinstance(op, Initial) and op.symbol not in alphabet:
            raise ProgramError(f"{name}: unknown letter {op.symbol!r}")
        for ref in _bool_refs(op):
            if isinstance(ref, Atom):
                if ref.symbol not in alphabet:
                    raise ProgramError(f"{name}: unknown letter {ref.symbol!r}")
                continue
            if isinstance(ref, Top):
                continue
            if ref not in sorts:
                raise ProgramError(f"{name}: {ref!r} used before definition")
            if sorts[ref] != "bool":
                raise ProgramError(f"{name}: {ref!r} is count-valued where a Boolean is expected")
        for ref in _count_refs(op):
            if ref not in sorts:
                raise ProgramError(f"{name}: {ref!r} used before definition")
            if sorts[ref] != "count":
                raise ProgramError(f"{name}: {ref!r} is Boolean where a count is expected")
        if isinstance(op, Compare):
            if op.rel not in RELATIONS:
                raise ProgramError(f"{name}: unknown relation {op.rel!r}")
            for r in (op.left, op.right):
                if isinstance(r, int) and r < 0:
                    raise ProgramError(f"{name}: constants must be natural numbers")
        if isinstance(op, CountConst) and op.value < 0:
            raise ProgramError(f"{name}: constants must be natural numbers")
        if not isinstance(op, BOOL_OPS + COUNT_OPS):
            raise ProgramError(f"{name}: unknown operation {op!r}")
        sorts[name] = "bool" if is_boolean(op) else "count"
    if not p.ops:
        raise ProgramError("empty program")
    if require_boolean_output and sorts[p.ops[-1][0]] != "bool":
        raise ProgramError(f"last operation {p.ops[-1][0]!r} must be Boolean-valued")


@dataclass(frozen=True)
class LmProgram:
    """A C-RASP program plus next-symbol predicates ``N_a`` for each letter and EOS."""

    base: CraspProgram
    next_ops: dict  # symbol (or EOS) -> Boolean op name
    eos: str = "$"

    def __post_init__(self):
        letters = [a for a in self.base.alphabet if a != self.eos]
        for a in letters + [self.eos]:
            if a not in self.next_ops:
                raise ProgramError(f"missing next-symbol predicate for {a!r}")
        for a, name in self.next_ops.items():
            try:
                sort = self.base.sort(name)
            except KeyError:
                raise ProgramError(f"next-symbol predicate {name!r} is not defined") from None
            if sort != "bool":
                raise ProgramError(f"next-symbol predicate {name!r} must be Boolean")

    @property
    def letters(self) -> list[str]:
        return [a for a in self.base.alphabet if a != self.eos]
