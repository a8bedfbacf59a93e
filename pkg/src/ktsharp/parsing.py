"""Concrete syntax for Kt[#] formulas, C-RASP programs, LM programs and FOC normal forms.

Formula grammar (``|`` < ``&`` < ``!`` in binding strength; binary operators
are left-associative)::

    formula  := conj ('|' conj)*
    conj     := unary ('&' unary)*
    unary    := '!' unary | 'Q_'<letter> | 'T' | comparison | '(' formula ')'
    comparison := term (REL term)+          REL in <= < = >= >
    term     := factor (('+' | '-') factor)*
    factor   := '#[' formula ']' | NATURAL | 'i' | '(' term ')'

Chained comparisons ``a = b = c`` mean ``a = b & b = c``.

Files are UTF-8 text with a header line ``alphabet: a b c``; ``#`` starts a
comment unless it begins a count (``#[`` or ``#2[``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from . import program as P
from .syntax import (Add, And, Atom, Count, Eq, Formula, LinearComparison, Leq, Lt, Not, Num,
                     Or, Position, Sub, Top, desugar, modal_depth)


class KtSyntaxError(ValueError):
    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.reason = message


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


_SYMBOLS = [":=", "#2[", "#[", "<=", ">=", "[", "]", "(", ")", "!", "¬", "&", "∧", "|", "∨",
            "<", ">", "=", "+", "-", ",", "*", "≤", "≥"]
_CANON = {"¬": "!", "∧": "&", "∨": "|", "≤": "<=", "≥": ">="}
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")
_INT = re.compile(r"[0-9]+")


def strip_comment(line: str) -> str:
    k = 0
    while True:
        k = line.find("#", k)
        if k < 0:
            return line
        if line.startswith("#[", k) or line.startswith("#2[", k):
            k += 1
            continue
        return line[:k]


def tokenize(text: str, line: int = 1, col0: int = 1) -> list[Token]:
    tokens = []
    k = 0
    col = col0
    while k < len(text):
        ch = text[k]
        if ch in " \t\r\n":
            if ch == "\n":
                line += 1
                col = 0
            k += 1
            col += 1
            continue
        if text.startswith("Q_", k):
            if k + 2 >= len(text) or text[k + 2] in " \t\r\n":
                raise KtSyntaxError("'Q_' must be followed by a letter", line, col)
            tokens.append(Token("ATOM", text[k + 2], line, col))
            k += 3
            col += 3
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, k):
                tokens.append(Token(_CANON.get(sym, sym), sym, line, col))
                k += len(sym)
                col += len(sym)
                break
        else:
            m = _INT.match(text, k)
            if m:
                tokens.append(Token("INT", m.group(), line, col))
            else:
                m = _IDENT.match(text, k)
                if not m:
                    raise KtSyntaxError(f"unexpected character {ch!r}", line, col)
                tokens.append(Token("IDENT", m.group(), line, col))
            k = m.end()
            col += len(m.group())
    tokens.append(Token("EOF", "", line, col))
    return tokens


class _Stream:
    def __init__(self, tokens: list[Token], alphabet):
        self.tokens = tokens
        self.pos = 0
        self.alphabet = None if alphabet is None else set(alphabet)

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.tok
        if kind == "IDENT" and text is not None:
            return t.kind == "IDENT" and t.text == text
        return t.kind == kind

    def error(self, message: str, tok: Token | None = None) -> KtSyntaxError:
        tok = tok or self.tok
        return KtSyntaxError(message, tok.line, tok.col)

    def expect(self, kind: str, text: str | None = None) -> Token:
        if not self.at(kind, text):
            want = text or kind
            got = self.tok.text or "end of input"
            raise self.error(f"expected {want!r}, found {got!r}")
        t = self.tok
        self.pos += 1
        return t

    def letter(self, tok: Token) -> str:
        if self.alphabet is not None and tok.text not in self.alphabet:
            raise self.error(f"unknown letter {tok.text!r}", tok)
        return tok.text


# -- formulas -----------------------------------------------------------------

_RELS = ("<=", "<", "=", ">=", ">")


def _formula(s: _Stream) -> Formula:
    out = _conj(s)
    while s.at("|"):
        s.pos += 1
        out = Or(out, _conj(s))
    return out


def _conj(s: _Stream) -> Formula:
    out = _unary(s)
    while s.at("&"):
        s.pos += 1
        out = And(out, _unary(s))
    return out


def _unary(s: _Stream) -> Formula:
    if s.at("!"):
        s.pos += 1
        return Not(_unary(s))
    if s.at("ATOM"):
        return Atom(s.letter(s.expect("ATOM")))
    if s.at("IDENT", "T"):
        s.pos += 1
        return Top()
    if s.at("("):
        start = s.pos
        try:
            return _comparison(s)
        except KtSyntaxError as first:
            s.pos = start
            s.expect("(")
            try:
                inner = _formula(s)
                s.expect(")")
            except KtSyntaxError as second:
                raise max(first, second, key=lambda e: (e.line, e.column)) from None
            return inner
    return _comparison(s)


def _comparison(s: _Stream) -> Formula:
    terms = [_term(s)]
    rels = []
    while s.tok.kind in _RELS:
        rels.append(s.tok.kind)
        s.pos += 1
        terms.append(_term(s))
    if not rels:
        raise s.error("expected a comparison operator")
    parts = [_relation(terms[k], rel, terms[k + 1]) for k, rel in enumerate(rels)]
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def _relation(left, rel, right) -> Formula:
    if rel == "<=":
        return Leq(left, right)
    if rel == ">=":
        return Leq(right, left)
    if rel == "<":
        return Lt(left, right)
    if rel == ">":
        return Lt(right, left)
    return Eq(left, right)


def _term(s: _Stream):
    out = _factor(s)
    while s.at("+") or s.at("-"):
        op = s.tok.kind
        s.pos += 1
        right = _factor(s)
        out = Add(out, right) if op == "+" else Sub(out, right)
    return out


def _factor(s: _Stream):
    if s.at("#["):
        s.pos += 1
        body = _formula(s)
        s.expect("]")
        return Count(body)
    if s.at("INT"):
        return Num(int(s.expect("INT").text))
    if s.at("IDENT", "i"):
        s.pos += 1
        return Position()
    if s.at("("):
        s.pos += 1
        inner = _term(s)
        s.expect(")")
        return inner
    got = s.tok.text or "end of input"
    raise s.error(f"malformed count expression at {got!r}")


def parse_kt(text: str, alphabet=None, *, sugar: bool = False) -> Formula:
    """Parse a Kt[#] formula; sugar is expanded unless ``sugar=True``."""
    s = _Stream(tokenize(text), alphabet)
    f = _formula(s)
    if not s.at("EOF"):
        raise s.error(f"unexpected {s.tok.text!r} after formula")
    return f if sugar else desugar(f)


# -- files -------------------------------------------------------------------

@dataclass
class _Lines:
    headers: dict
    body: list  # (line number, text)


def _split_file(text: str, header_keys=("alphabet", "eos")) -> _Lines:
    headers: dict = {}
    body = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = strip_comment(raw).strip()
        if not line:
            continue
        m = re.match(r"([a-z]+):\s*(.*)$", line)
        if m and m.group(1) in header_keys and not line.startswith(m.group(1) + ":="):
            headers[m.group(1)] = m.group(2).split()
            continue
        body.append((number, line))
    return _Lines(headers, body)


def read_alphabet(lines: _Lines) -> tuple:
    if "alphabet" not in lines.headers:
        raise KtSyntaxError("missing 'alphabet:' header line", 1, 1)
    letters = lines.headers["alphabet"]
    for a in letters:
        if len(a) != 1:
            raise KtSyntaxError(f"alphabet letters must be single characters, got {a!r}")
    if len(set(letters)) != len(letters):
        raise KtSyntaxError("duplicate alphabet letter")
    return tuple(letters)


def parse_kt_file(text: str) -> tuple[tuple, Formula]:
    """Return ``(alphabet, formula)`` from a ``.kt`` file."""
    lines = _split_file(text)
    alphabet = read_alphabet(lines)
    if not lines.body:
        raise KtSyntaxError("file contains no formula")
    tokens: list[Token] = []
    for number, line in lines.body:
        tokens.extend(tokenize(line, number)[:-1])
    last = lines.body[-1][0]
    tokens.append(Token("EOF", "", last, len(lines.body[-1][1]) + 1))
    s = _Stream(tokens, alphabet)
    f = _formula(s)
    if not s.at("EOF"):
        raise s.error(f"unexpected {s.tok.text!r} after formula")
    return alphabet, desugar(f)


# -- C-RASP ------------------------------------------------------------------

_RESERVED = {"if", "then", "else", "min", "max", "T", "i", "j", "next", "EOS"}


def _at_i(s: _Stream, var: str = "i") -> None:
    s.expect("(")
    s.expect("IDENT", var)
    s.expect(")")


def _bool_ref(s: _Stream, names: dict, var: str = "i"):
    if s.at("ATOM"):
        atom = Atom(s.letter(s.expect("ATOM")))
        _at_i(s, var)
        return atom
    if s.at("IDENT", "T"):
        s.pos += 1
        if s.at("("):
            _at_i(s, var)
        return Top()
    tok = s.expect("IDENT")
    _at_i(s, var)
    _check_name(s, tok, names, "bool")
    return tok.text


def _count_ref(s: _Stream, names: dict):
    if s.at("INT"):
        return int(s.expect("INT").text)
    tok = s.expect("IDENT")
    _at_i(s)
    _check_name(s, tok, names, "count")
    return tok.text


def _check_name(s: _Stream, tok: Token, names: dict, sort: str) -> None:
    if tok.text not in names:
        raise s.error(f"{tok.text!r} used before definition", tok)
    if names[tok.text] != sort:
        want = "Boolean" if sort == "bool" else "count"
        raise s.error(f"{tok.text!r} has the wrong sort (expected a {want} operation)", tok)


def _binary_body(s: _Stream, names: dict):
    def disj():
        out = conj()
        while s.at("|"):
            s.pos += 1
            out = P.BOr(out, conj())
        return out

    def conj():
        out = unary()
        while s.at("&"):
            s.pos += 1
            out = P.BAnd(out, unary())
        return out

    def unary():
        if s.at("!"):
            s.pos += 1
            return P.BNot(unary())
        if s.at("("):
            s.pos += 1
            inner = disj()
            s.expect(")")
            return inner
        if s.at("ATOM"):
            atom = Atom(s.letter(s.expect("ATOM")))
            return P.At(atom, _pos_var(s))
        if s.at("IDENT", "T"):
            s.pos += 1
            if s.at("("):
                _pos_var(s)
            return P.At(Top(), "j")
        tok = s.expect("IDENT")
        var = _pos_var(s)
        _check_name(s, tok, names, "bool")
        return P.At(tok.text, var)

    return disj()


def _pos_var(s: _Stream) -> str:
    s.expect("(")
    if s.at("IDENT", "i") or s.at("IDENT", "j"):
        var = s.tok.text
        s.pos += 1
    else:
        raise s.error("expected position variable 'i' or 'j'")
    s.expect(")")
    return var


def _count_bound(s: _Stream) -> None:
    s.expect("IDENT", "j")
    s.expect("<=")
    s.expect("IDENT", "i")
    s.expect("]")


def _crasp_rhs(s: _Stream, names: dict):
    t = s.tok
    if t.kind == "#[":
        s.pos += 1
        _count_bound(s)
        return P.Counting(_bool_ref(s, names, "j"))
    if t.kind == "#2[":
        s.pos += 1
        _count_bound(s)
        return P.BinaryCounting(_binary_body(s, names))
    if t.kind == "IDENT" and t.text == "if":
        s.pos += 1
        cond = _bool_ref(s, names)
        s.expect("IDENT", "then")
        then = _count_ref(s, names)
        s.expect("IDENT", "else")
        orelse = _count_ref(s, names)
        for r in (then, orelse):
            if isinstance(r, int):
                raise s.error("conditional branches must name count operations")
        return P.Conditional(cond, then, orelse)
    if t.kind == "IDENT" and t.text in ("min", "max") and s.peek(1).kind == "(":
        s.pos += 2
        left = _count_ref(s, names)
        s.expect(",")
        right = _count_ref(s, names)
        s.expect(")")
        if isinstance(left, int) or isinstance(right, int):
            raise s.error("min/max operands must name count operations")
        return (P.CountMin if t.text == "min" else P.CountMax)(left, right)
    if t.kind == "!":
        s.pos += 1
        return P.BoolNot(_bool_ref(s, names))
    if t.kind == "IDENT" and t.text == "T" and s.peek(1).kind == "EOF":
        s.pos += 1
        return P.BoolConst()
    if t.kind == "INT" and s.peek(1).kind == "EOF":
        s.pos += 1
        return P.CountConst(int(t.text))
    if t.kind == "ATOM":
        left = _bool_ref(s, names)
        if s.at("EOF"):
            return P.Initial(left.symbol)
        return _bool_binary(s, names, left)
    sort = names.get(t.text) if t.kind == "IDENT" else ("count" if t.kind == "INT" else None)
    if t.kind == "IDENT" and sort is None:
        raise s.error(f"{t.text!r} used before definition")
    if sort == "bool":
        left = _bool_ref(s, names)
        if s.at("EOF"):
            raise s.error("an operation cannot merely copy another; use an explicit operation")
        return _bool_binary(s, names, left)
    if sort == "count":
        left = _count_ref(s, names)
        if s.tok.kind in _RELS:
            rel = s.tok.kind
            s.pos += 1
            return P.Compare(left, rel, _count_ref(s, names))
        if s.at("+") or s.at("-"):
            op = s.tok.kind
            s.pos += 1
            right = _count_ref(s, names)
            if isinstance(left, int) or isinstance(right, int):
                raise s.error("addition/subtraction operands must name count operations")
            return P.CountAdd(left, right) if op == "+" else P.CountSub(left, right)
        raise s.error("expected a comparison or arithmetic operator")
    raise s.error(f"cannot parse operation starting with {t.text!r}")


def _bool_binary(s: _Stream, names: dict, left):
    if s.at("&") or s.at("|"):
        op = s.tok.kind
        s.pos += 1
        right = _bool_ref(s, names)
        return P.BoolAnd(left, right) if op == "&" else P.BoolOr(left, right)
    raise s.error("expected '&' or '|'")


def _crasp_lines(lines: _Lines, alphabet) -> tuple[list, list]:
    ops = []
    names: dict[str, str] = {}
    extra = []
    for number, line in lines.body:
        tokens = tokenize(line, number)
        s = _Stream(tokens, alphabet)
        if s.at("IDENT", "next"):
            extra.append((number, line, tokens))
            continue
        tok = s.expect("IDENT")
        if tok.text in _RESERVED:
            raise s.error(f"{tok.text!r} is reserved", tok)
        if tok.text in names:
            raise s.error(f"duplicate operation name {tok.text!r}", tok)
        _at_i(s)
        s.expect(":=")
        op = _crasp_rhs(s, names)
        if not s.at("EOF"):
            raise s.error(f"unexpected {s.tok.text!r} at end of operation")
        names[tok.text] = "bool" if P.is_boolean(op) else "count"
        ops.append((tok.text, op))
    return ops, extra


def parse_crasp(text: str, alphabet=None) -> P.CraspProgram:
    """Parse a C-RASP program.

    ``text`` may carry its own ``alphabet:`` header; otherwise ``alphabet``
    must be given.
    """
    lines = _split_file(text)
    if "alphabet" in lines.headers:
        alphabet = read_alphabet(lines)
    elif alphabet is None:
        raise KtSyntaxError("missing 'alphabet:' header line", 1, 1)
    ops, extra = _crasp_lines(lines, alphabet)
    if extra:
        number = extra[0][0]
        raise KtSyntaxError("'next' lines are only allowed in language-model files", number, 1)
    if not ops:
        raise KtSyntaxError("program contains no operations")
    try:
        return P.CraspProgram(tuple(alphabet), tuple(ops))
    except P.ProgramError as e:
        raise KtSyntaxError(str(e), lines.body[-1][0], 1) from None


def parse_lm(text: str) -> P.LmProgram:
    """Parse a language-model file: a C-RASP program plus ``next a := NAME`` lines."""
    lines = _split_file(text)
    letters = read_alphabet(lines)
    eos = lines.headers.get("eos", ["$"])[0]
    if eos in letters:
        raise KtSyntaxError(f"EOS letter {eos!r} must not be in the alphabet")
    alphabet = letters + (eos,)
    ops, extra = _crasp_lines(lines, alphabet)
    next_ops = {}
    for number, line, tokens in extra:
        s = _Stream(tokens, alphabet)
        s.expect("IDENT", "next")
        if s.at("IDENT", "EOS"):
            s.pos += 1
            symbol = eos
        else:
            tok = s.tok
            if tok.text not in letters:
                raise s.error(f"unknown letter {tok.text!r}")
            symbol = tok.text
            s.pos += 1
        s.expect(":=")
        name = s.expect("IDENT").text
        if not s.at("EOF"):
            raise s.error("unexpected text after next-symbol declaration")
        next_ops[symbol] = name
    base = P.CraspProgram(alphabet, tuple(ops))
    try:
        return P.LmProgram(base, next_ops, eos)
    except P.ProgramError as e:
        raise KtSyntaxError(str(e)) from None


def parse_foc(text: str):
    """Parse an FOC[+] normal-form file (``count x := F`` / ``constraint L REL R`` lines)."""
    from .translator import FocNormalForm

    lines = _split_file(text)
    alphabet = read_alphabet(lines)
    counted = []
    constraints = []
    for number, line in lines.body:
        tokens = tokenize(line, number)
        s = _Stream(tokens, alphabet)
        kw = s.expect("IDENT")
        if kw.text == "count":
            var = s.expect("IDENT").text
            s.expect(":=")
            body = _formula(s)
            if not s.at("EOF"):
                raise s.error(f"unexpected {s.tok.text!r}")
            body = desugar(body)
            if modal_depth(body) != 0:
                raise KtSyntaxError("counted bodies must be quantifier-free (modal depth 0)",
                                    number, 1)
            counted.append((var, body))
        elif kw.text == "constraint":
            left = _linear(s)
            if s.tok.kind not in _RELS or s.tok.kind in ("<", ">"):
                raise s.error("expected one of <=, =, >=")
            rel = s.tok.kind
            s.pos += 1
            right = _linear(s)
            if not s.at("EOF"):
                raise s.error(f"unexpected {s.tok.text!r}")
            diff = _lin_sub(right, left)  # right - left >= 0 for <=
            if rel == "<=":
                constraints.append(diff)
            elif rel == ">=":
                constraints.append(_lin_neg(diff))
            else:
                constraints.extend([diff, _lin_neg(diff)])
        else:
            raise s.error("expected 'count' or 'constraint'", kw)
    return FocNormalForm(alphabet, tuple(counted), tuple(constraints))


def _linear(s: _Stream) -> tuple[dict, int]:
    coefs: dict = {}
    const = 0
    sign = 1
    if s.at("-"):
        s.pos += 1
        sign = -1
    while True:
        if s.at("INT"):
            n = int(s.expect("INT").text)
            if s.at("*"):
                s.pos += 1
                var = s.expect("IDENT").text
                coefs[var] = coefs.get(var, 0) + sign * n
            else:
                const += sign * n
        else:
            var = s.expect("IDENT").text
            coefs[var] = coefs.get(var, 0) + sign
        if s.at("+") or s.at("-"):
            sign = 1 if s.tok.kind == "+" else -1
            s.pos += 1
            continue
        return coefs, const


def _lin_sub(a, b):
    coefs = dict(a[0])
    for v, c in b[0].items():
        coefs[v] = coefs.get(v, 0) - c
    return LinearComparison(tuple((c, v) for v, c in coefs.items() if c), a[1] - b[1])


def _lin_neg(lc: LinearComparison) -> LinearComparison:
    return LinearComparison(tuple((-c, v) for c, v in lc.terms), -lc.constant)


def load(path) -> tuple[str, object]:
    """Load a corpus/program file by extension: ``.kt``, ``.crasp``, ``.lm`` or ``.foc``."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    suffix = path.suffix
    if suffix == ".kt":
        return "kt", parse_kt_file(text)
    if suffix == ".crasp":
        return "crasp", parse_crasp(text)
    if suffix == ".lm":
        return "lm", parse_lm(text)
    if suffix == ".foc":
        return "foc", parse_foc(text)
    raise ValueError(f"unknown file type {suffix!r} (expected .kt, .crasp, .lm or .foc)")


# -- program printing ----------------------------------------------------------

def _fmt_bool(ref, var: str = "i") -> str:
    if isinstance(ref, Atom):
        return f"Q_{ref.symbol}({var})"
    if isinstance(ref, Top):
        return "T"
    return f"{ref}({var})"


def _fmt_count(ref) -> str:
    return str(ref) if isinstance(ref, int) else f"{ref}(i)"


def _fmt_binary(expr, top: bool = True) -> str:
    if isinstance(expr, P.At):
        return _fmt_bool(expr.name, expr.pos)
    if isinstance(expr, P.BNot):
        return "!" + _fmt_binary(expr.arg, False)
    op = " & " if isinstance(expr, P.BAnd) else " | "
    text = _fmt_binary(expr.left, False) + op + _fmt_binary(expr.right, False)
    return text if top else f"({text})"


def format_op(op) -> str:
    """Right-hand side of one C-RASP operation in concrete syntax."""
    if isinstance(op, P.Initial):
        return f"Q_{op.symbol}(i)"
    if isinstance(op, P.BoolNot):
        return "!" + _fmt_bool(op.arg)
    if isinstance(op, P.BoolAnd):
        return f"{_fmt_bool(op.left)} & {_fmt_bool(op.right)}"
    if isinstance(op, P.BoolOr):
        return f"{_fmt_bool(op.left)} | {_fmt_bool(op.right)}"
    if isinstance(op, P.Compare):
        return f"{_fmt_count(op.left)} {op.rel} {_fmt_count(op.right)}"
    if isinstance(op, P.BoolConst):
        return "T"
    if isinstance(op, P.Counting):
        return "#[j <= i] " + _fmt_bool(op.body, "j")
    if isinstance(op, P.Conditional):
        return f"if {_fmt_bool(op.cond)} then {op.then}(i) else {op.orelse}(i)"
    if isinstance(op, P.CountAdd):
        return f"{op.left}(i) + {op.right}(i)"
    if isinstance(op, P.CountSub):
        return f"{op.left}(i) - {op.right}(i)"
    if isinstance(op, (P.CountMin, P.CountMax)):
        name = "min" if isinstance(op, P.CountMin) else "max"
        return f"{name}({op.left}(i), {op.right}(i))"
    if isinstance(op, P.CountConst):
        return str(op.value)
    if isinstance(op, P.BinaryCounting):
        return "#2[j <= i] " + _fmt_binary(op.body)
    raise TypeError(f"unknown operation {op!r}")


def format_crasp(p: P.CraspProgram, *, header: bool = True) -> str:
    lines = [f"alphabet: {' '.join(p.alphabet)}"] if header else []
    lines += [f"{name}(i) := {format_op(op)}" for name, op in p.ops]
    return "\n".join(lines) + "\n"


def format_lm(lm: P.LmProgram) -> str:
    lines = [f"alphabet: {' '.join(lm.letters)}", f"eos: {lm.eos}"]
    lines += [f"{name}(i) := {format_op(op)}" for name, op in lm.base.ops]
    for a in lm.letters + [lm.eos]:
        label = "EOS" if a == lm.eos else a
        lines.append(f"next {label} := {lm.next_ops[a]}")
    return "\n".join(lines) + "\n"


def format_kt(alphabet, f) -> str:
    from .syntax import pretty
    return f"alphabet: {' '.join(alphabet)}\n{pretty(f)}\n"


def pretty_print(x) -> str:
    """Concrete syntax for a formula, count term, or program."""
    if isinstance(x, P.CraspProgram):
        return format_crasp(x)
    if isinstance(x, P.LmProgram):
        return format_lm(x)
    from .syntax import pretty
    return pretty(x)
