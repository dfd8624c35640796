"""Linear dynamic logic over finite traces.

Syntax trees, a concrete-syntax parser and printer, and trace evaluation.
Formulas are evaluated over traces of propositional labels; a trace of n
labels has positions 0..n, where position n is the empty suffix reached
after consuming the whole trace. `end` holds exactly there.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import LdlfSyntaxError

__all__ = [
    "BoolExpr", "Truth", "Falsity", "Atom", "Neg", "Conj", "Disj",
    "Formula", "TT", "FF", "FNot", "FAnd", "FOr", "Diamond", "Box",
    "Path", "Step", "Test", "Concat", "Union", "Star",
    "END", "parse_ldlf", "parse_bool", "print_ldlf", "print_bool",
    "eval_bool", "eval_trace", "props_of",
]


# ---------------------------------------------------------------------------
# syntax trees
# ---------------------------------------------------------------------------

class BoolExpr:
    """Propositional expression over label atoms."""

    def __str__(self) -> str:
        return print_bool(self)


@dataclass(frozen=True)
class Truth(BoolExpr):
    """The constant `true`."""


@dataclass(frozen=True)
class Falsity(BoolExpr):
    """The constant `false`."""


@dataclass(frozen=True)
class Atom(BoolExpr):
    """A single proposition, satisfied when its name is in the label."""

    name: str


@dataclass(frozen=True)
class Neg(BoolExpr):
    arg: BoolExpr


@dataclass(frozen=True)
class Conj(BoolExpr):
    left: BoolExpr
    right: BoolExpr


@dataclass(frozen=True)
class Disj(BoolExpr):
    left: BoolExpr
    right: BoolExpr


class Formula:
    """Temporal formula."""

    def __str__(self) -> str:
        return print_ldlf(self)


class Path:
    """Regular expression over steps and tests, used inside modalities."""

    def __str__(self) -> str:
        return _print_path(self, 1)


@dataclass(frozen=True)
class TT(Formula):
    """Trivially true."""


@dataclass(frozen=True)
class FF(Formula):
    """Trivially false."""


@dataclass(frozen=True)
class FNot(Formula):
    arg: Formula


@dataclass(frozen=True)
class FAnd(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class FOr(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Diamond(Formula):
    """Some path expansion leads to a position satisfying the argument."""

    path: Path
    arg: Formula


@dataclass(frozen=True)
class Box(Formula):
    """Every path expansion leads to a position satisfying the argument."""

    path: Path
    arg: Formula


@dataclass(frozen=True)
class Step(Path):
    """Consume one label satisfying the guard."""

    guard: BoolExpr


@dataclass(frozen=True)
class Test(Path):
    """Consume nothing; succeed only where the formula holds."""

    arg: Formula

    __test__ = False  # keep pytest from collecting the class by its name


@dataclass(frozen=True)
class Concat(Path):
    left: Path
    right: Path


@dataclass(frozen=True)
class Union(Path):
    left: Path
    right: Path


@dataclass(frozen=True)
class Star(Path):
    arg: Path


# `end` is sugar for "no step is possible": the parser emits this form
# directly and the printer folds it back.
END: Formula = Box(Step(Truth()), FF())


# ---------------------------------------------------------------------------
# tokenizer
# ---------------------------------------------------------------------------

_KEYWORDS = ("tt", "ff", "end", "true", "false")
_PUNCT = "()<>[]!&|;+*?"


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            col += 1
            i += 1
            continue
        if ch in _PUNCT:
            tokens.append(_Token(ch, ch, line, col))
            col += 1
            i += 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = word if word in _KEYWORDS else "identifier"
            tokens.append(_Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        raise LdlfSyntaxError(f"unexpected character {ch!r}", line, col, frozenset())
    tokens.append(_Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

class _Fail(Exception):
    """Internal backtracking signal; never escapes the parser."""


_FORMULA_START = frozenset({"tt", "ff", "end", "!", "<", "[", "("})
_BOOL_START = frozenset({"true", "false", "identifier", "!", "("})


class _Parser:
    """Recursive descent with backtracking at the path-atom fork.

    Binding strength: `!` and the modalities bind tighter than `&`, which
    binds tighter than `|`; in paths, `*` binds tighter than `;`, which
    binds tighter than `+`. Binary boolean connectives associate to the
    left, `;` and `+` to the right.
    """

    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0
        self.far_pos = 0
        self.far_expected: set[str] = set()

    def parse_formula_text(self) -> Formula:
        try:
            f = self.formula()
            self.expect("eof")
            return f
        except _Fail:
            raise self.error() from None

    def parse_bool_text(self) -> BoolExpr:
        try:
            b = self.boolexpr()
            self.expect("eof")
            return b
        except _Fail:
            raise self.error() from None

    # -- plumbing

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected: Iterable[str]) -> None:
        if self.pos > self.far_pos:
            self.far_pos = self.pos
            self.far_expected = set(expected)
        elif self.pos == self.far_pos:
            self.far_expected.update(expected)
        raise _Fail()

    def expect(self, kind: str) -> _Token:
        if self.peek().kind != kind:
            self.fail({kind})
        return self.advance()

    def error(self) -> LdlfSyntaxError:
        tok = self.tokens[self.far_pos]
        shown = tok.text if tok.kind != "eof" else "end of input"
        return LdlfSyntaxError(f"unexpected {shown!r}", tok.line, tok.column,
                               frozenset(self.far_expected))

    # -- formulas

    def formula(self) -> Formula:
        f = self.and_formula()
        while self.peek().kind == "|":
            self.advance()
            f = FOr(f, self.and_formula())
        return f

    def and_formula(self) -> Formula:
        f = self.unary_formula()
        while self.peek().kind == "&":
            self.advance()
            f = FAnd(f, self.unary_formula())
        return f

    def unary_formula(self) -> Formula:
        tok = self.peek()
        if tok.kind == "tt":
            self.advance()
            return TT()
        if tok.kind == "ff":
            self.advance()
            return FF()
        if tok.kind == "end":
            self.advance()
            return END
        if tok.kind == "!":
            self.advance()
            return FNot(self.unary_formula())
        if tok.kind == "<":
            self.advance()
            p = self.path()
            self.expect(">")
            return Diamond(p, self.unary_formula())
        if tok.kind == "[":
            self.advance()
            p = self.path()
            self.expect("]")
            return Box(p, self.unary_formula())
        if tok.kind == "(":
            self.advance()
            f = self.formula()
            self.expect(")")
            return f
        self.fail(_FORMULA_START)
        raise AssertionError("unreachable")

    # -- paths

    def path(self) -> Path:
        p = self.concat_path()
        if self.peek().kind == "+":
            self.advance()
            return Union(p, self.path())
        return p

    def concat_path(self) -> Path:
        p = self.star_path()
        if self.peek().kind == ";":
            self.advance()
            return Concat(p, self.concat_path())
        return p

    def star_path(self) -> Path:
        p = self.atom_path()
        while self.peek().kind == "*":
            self.advance()
            p = Star(p)
        return p

    def atom_path(self) -> Path:
        # A test is a formula followed by `?`; a bare formula is not a path,
        # and a bare proposition is not a formula, so both remaining routes
        # are tried in turn and the longest viable one wins.
        start = self.pos
        try:
            f = self.formula()
            self.expect("?")
            return Test(f)
        except _Fail:
            self.pos = start
        try:
            return Step(self.boolexpr())
        except _Fail:
            self.pos = start
        if self.peek().kind == "(":
            self.advance()
            p = self.path()
            self.expect(")")
            return p
        self.fail(_FORMULA_START | _BOOL_START)
        raise AssertionError("unreachable")

    # -- boolean expressions

    def boolexpr(self) -> BoolExpr:
        b = self.and_bool()
        while self.peek().kind == "|":
            self.advance()
            b = Disj(b, self.and_bool())
        return b

    def and_bool(self) -> BoolExpr:
        b = self.unary_bool()
        while self.peek().kind == "&":
            self.advance()
            b = Conj(b, self.unary_bool())
        return b

    def unary_bool(self) -> BoolExpr:
        tok = self.peek()
        if tok.kind == "true":
            self.advance()
            return Truth()
        if tok.kind == "false":
            self.advance()
            return Falsity()
        if tok.kind == "identifier":
            self.advance()
            return Atom(tok.text)
        if tok.kind == "!":
            self.advance()
            return Neg(self.unary_bool())
        if tok.kind == "(":
            self.advance()
            b = self.boolexpr()
            self.expect(")")
            return b
        self.fail(_BOOL_START)
        raise AssertionError("unreachable")


def parse_ldlf(text: str) -> Formula:
    """Parse formula text; `end` is desugared on the way in."""
    return _Parser(_tokenize(text)).parse_formula_text()


def parse_bool(text: str) -> BoolExpr:
    """Parse a bare propositional expression."""
    return _Parser(_tokenize(text)).parse_bool_text()


# ---------------------------------------------------------------------------
# printer
# ---------------------------------------------------------------------------

def print_ldlf(f: Formula) -> str:
    """Render a formula so that parsing the result rebuilds it exactly."""
    return _print_formula(f, 1)


def print_bool(b: BoolExpr) -> str:
    """Render a propositional expression; same round-trip contract."""
    return _print_boolexpr(b, 1)


def _wrap(s: str, prec: int, need: int) -> str:
    return f"({s})" if prec < need else s


def _print_formula(f: Formula, need: int) -> str:
    if isinstance(f, TT):
        return "tt"
    if isinstance(f, FF):
        return "ff"
    if f == END:
        return "end"
    if isinstance(f, FNot):
        return "!" + _print_formula(f.arg, 3)
    if isinstance(f, Diamond):
        return _wrap(f"<{_print_path(f.path, 1)}>" + _print_formula(f.arg, 3), 3, need)
    if isinstance(f, Box):
        return _wrap(f"[{_print_path(f.path, 1)}]" + _print_formula(f.arg, 3), 3, need)
    if isinstance(f, FAnd):
        s = _print_formula(f.left, 2) + " & " + _print_formula(f.right, 3)
        return _wrap(s, 2, need)
    if isinstance(f, FOr):
        s = _print_formula(f.left, 1) + " | " + _print_formula(f.right, 2)
        return _wrap(s, 1, need)
    raise TypeError(f"not a formula: {f!r}")


def _print_path(p: Path, need: int) -> str:
    if isinstance(p, Step):
        prec = 4 if isinstance(p.guard, (Atom, Truth, Falsity)) else 3
        return _wrap(_print_boolexpr(p.guard, 1), prec, need)
    if isinstance(p, Test):
        return _wrap(_print_formula(p.arg, 1) + "?", 3, need)
    if isinstance(p, Star):
        return _wrap(_print_path(p.arg, 4) + "*", 3, need)
    if isinstance(p, Concat):
        s = _print_path(p.left, 3) + "; " + _print_path(p.right, 2)
        return _wrap(s, 2, need)
    if isinstance(p, Union):
        s = _print_path(p.left, 2) + " + " + _print_path(p.right, 1)
        return _wrap(s, 1, need)
    raise TypeError(f"not a path: {p!r}")


def _print_boolexpr(b: BoolExpr, need: int) -> str:
    if isinstance(b, Truth):
        return "true"
    if isinstance(b, Falsity):
        return "false"
    if isinstance(b, Atom):
        return b.name
    if isinstance(b, Neg):
        return "!" + _print_boolexpr(b.arg, 3)
    if isinstance(b, Conj):
        s = _print_boolexpr(b.left, 2) + " & " + _print_boolexpr(b.right, 3)
        return _wrap(s, 2, need)
    if isinstance(b, Disj):
        s = _print_boolexpr(b.left, 1) + " | " + _print_boolexpr(b.right, 2)
        return _wrap(s, 1, need)
    raise TypeError(f"not a boolean expression: {b!r}")


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def eval_bool(b: BoolExpr, label: Iterable[str]) -> bool:
    """Evaluate a propositional expression against one label."""
    if not isinstance(label, (set, frozenset)):
        label = frozenset(label)
    return _eval_bool(b, label)


def _eval_bool(b: BoolExpr, label) -> bool:
    if isinstance(b, Atom):
        return b.name in label
    if isinstance(b, Truth):
        return True
    if isinstance(b, Falsity):
        return False
    if isinstance(b, Neg):
        return not _eval_bool(b.arg, label)
    if isinstance(b, Conj):
        return _eval_bool(b.left, label) and _eval_bool(b.right, label)
    if isinstance(b, Disj):
        return _eval_bool(b.left, label) or _eval_bool(b.right, label)
    raise TypeError(f"not a boolean expression: {b!r}")


def eval_trace(f: Formula, trace: Sequence[Iterable[str]]) -> bool:
    """Decide whether the formula holds at the start of the trace.

    Works position-wise over the whole trace at once: every subformula is
    mapped to the bitmask of positions where it holds, and every path to a
    per-position bitmask of reachable positions. Position n (one past the
    last label) is the empty suffix.
    """
    labels = [frozenset(l) for l in trace]
    n = len(labels)
    full = (1 << (n + 1)) - 1
    fmemo: dict[int, int] = {}
    pmemo: dict[int, list[int]] = {}

    def fsat(g: Formula) -> int:
        key = id(g)
        got = fmemo.get(key)
        if got is not None:
            return got
        if isinstance(g, TT):
            out = full
        elif isinstance(g, FF):
            out = 0
        elif isinstance(g, FNot):
            out = full & ~fsat(g.arg)
        elif isinstance(g, FAnd):
            out = fsat(g.left) & fsat(g.right)
        elif isinstance(g, FOr):
            out = fsat(g.left) | fsat(g.right)
        elif isinstance(g, Diamond):
            rows = prel(g.path)
            sat = fsat(g.arg)
            out = 0
            for i in range(n + 1):
                if rows[i] & sat:
                    out |= 1 << i
        elif isinstance(g, Box):
            rows = prel(g.path)
            sat = fsat(g.arg)
            out = 0
            for i in range(n + 1):
                if not rows[i] & ~sat & full:
                    out |= 1 << i
        else:
            raise TypeError(f"not a formula: {g!r}")
        fmemo[key] = out
        return out

    def prel(p: Path) -> list[int]:
        key = id(p)
        got = pmemo.get(key)
        if got is not None:
            return got
        if isinstance(p, Step):
            rows = [(1 << (i + 1)) if i < n and _eval_bool(p.guard, labels[i]) else 0
                    for i in range(n + 1)]
        elif isinstance(p, Test):
            sat = fsat(p.arg)
            rows = [(1 << i) if sat & (1 << i) else 0 for i in range(n + 1)]
        elif isinstance(p, Union):
            lrows, rrows = prel(p.left), prel(p.right)
            rows = [lrows[i] | rrows[i] for i in range(n + 1)]
        elif isinstance(p, Concat):
            lrows, rrows = prel(p.left), prel(p.right)
            rows = []
            for i in range(n + 1):
                acc = 0
                rest = lrows[i]
                while rest:
                    j = (rest & -rest).bit_length() - 1
                    rest &= rest - 1
                    acc |= rrows[j]
                rows.append(acc)
        elif isinstance(p, Star):
            base = prel(p.arg)
            rows = [(1 << i) | base[i] for i in range(n + 1)]
            # Reflexive-transitive closure by repeated squaring; the
            # position set is tiny so the loop count is immaterial.
            changed = True
            while changed:
                changed = False
                for i in range(n + 1):
                    acc = rows[i]
                    rest = rows[i]
                    while rest:
                        j = (rest & -rest).bit_length() - 1
                        rest &= rest - 1
                        acc |= rows[j]
                    if acc != rows[i]:
                        rows[i] = acc
                        changed = True
        else:
            raise TypeError(f"not a path: {p!r}")
        pmemo[key] = rows
        return rows

    return bool(fsat(f) & 1)


def props_of(f: "Formula | BoolExpr") -> frozenset[str]:
    """All proposition names occurring in a formula or boolean expression."""
    out: set[str] = set()
    if isinstance(f, (Truth, Falsity, Atom, Neg, Conj, Disj)):
        _collect_bool(f, out)
    else:
        _collect_formula(f, out)
    return frozenset(out)


def _collect_formula(f: Formula, out: set[str]) -> None:
    if isinstance(f, (TT, FF)):
        return
    if isinstance(f, FNot):
        _collect_formula(f.arg, out)
    elif isinstance(f, (FAnd, FOr)):
        _collect_formula(f.left, out)
        _collect_formula(f.right, out)
    elif isinstance(f, (Diamond, Box)):
        _collect_path(f.path, out)
        _collect_formula(f.arg, out)
    else:
        raise TypeError(f"not a formula: {f!r}")


def _collect_path(p: Path, out: set[str]) -> None:
    if isinstance(p, Step):
        _collect_bool(p.guard, out)
    elif isinstance(p, Test):
        _collect_formula(p.arg, out)
    elif isinstance(p, (Concat, Union)):
        _collect_path(p.left, out)
        _collect_path(p.right, out)
    elif isinstance(p, Star):
        _collect_path(p.arg, out)
    else:
        raise TypeError(f"not a path: {p!r}")


def _collect_bool(b: BoolExpr, out: set[str]) -> None:
    if isinstance(b, Atom):
        out.add(b.name)
    elif isinstance(b, Neg):
        _collect_bool(b.arg, out)
    elif isinstance(b, (Conj, Disj)):
        _collect_bool(b.left, out)
        _collect_bool(b.right, out)
    elif not isinstance(b, (Truth, Falsity)):
        raise TypeError(f"not a boolean expression: {b!r}")
