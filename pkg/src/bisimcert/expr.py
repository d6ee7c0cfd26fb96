"""Math-expression DSL: parser, evaluator, structural differentiation.

Vector fields, candidate certificate functions and input signals are all
written in this little language.  Trees are immutable after parsing and all
operations here are pure, so expressions can be shared freely between
threads and processes.

Grammar (see docs/grammar.md for the EBNF):

    expr   := term (('+'|'-') term)*
    term   := unary (('*'|'/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' signed)*          # left-associative
    signed := '-' signed | atom
    atom   := NUMBER | func '(' args ')' | NAME '[' INT ']' | NAME | '(' expr ')'

Bare names are shorthand for index 0 of the family (``t`` means ``t[0]``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EvalError, NonDifferentiableError, ParseError

UNARY_FUNCS = ("neg", "sin", "cos", "exp", "tanh", "sqrt", "abs")
NARY_FUNCS = ("min", "max")


# ---------------------------------------------------------------------------
# Expression tree


@dataclass(frozen=True)
class Expr:
    """Base class for DSL expression nodes."""

    def __str__(self):
        return pretty(self)


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    family: str
    index: int


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # one of UNARY_FUNCS
    arg: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str  # add | sub | mul | div | pow
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class MinMax(Expr):
    op: str  # min | max
    args: tuple[Expr, ...]


def normalize_families(families) -> dict[str, int]:
    """Turn a dict or (name, length) iterable into a validated dict."""
    if isinstance(families, Mapping):
        items = list(families.items())
    else:
        items = list(families)
    out: dict[str, int] = {}
    for name, length in items:
        if name in out:
            raise ParseError(f"duplicate family declaration '{name}'")
        if length < 0:
            raise ParseError(f"family '{name}' has negative length {length}")
        out[name] = int(length)
    return out


# ---------------------------------------------------------------------------
# Tokenizer / parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<sym>[-+*/^()\[\],]))"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            stripped = source[pos:].lstrip()
            if not stripped:
                break
            at = len(source) - len(stripped)
            raise ParseError(f"unexpected character {stripped[0]!r}", at)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("sym", m.group("sym"), m.start("sym")))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, families: dict[str, int]):
        self.source = source
        self.families = families
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_sym(self, sym):
        kind, text, pos = self.peek()
        if kind != "sym" or text != sym:
            raise ParseError(f"expected '{sym}', found {text or 'end of input'!r}", pos)
        return self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input {text!r}", pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "sym" and text in "+-":
                self.advance()
                rhs = self.term()
                e = Binary("add" if text == "+" else "sub", e, rhs)
            else:
                return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "sym" and text in "*/":
                self.advance()
                rhs = self.unary()
                e = Binary("mul" if text == "*" else "div", e, rhs)
            else:
                return e

    def unary(self) -> Expr:
        kind, text, _ = self.peek()
        if kind == "sym" and text == "-":
            self.advance()
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Expr:
        e = self.atom()
        while True:
            kind, text, _ = self.peek()
            if kind == "sym" and text == "^":
                self.advance()
                e = Binary("pow", e, self.signed_atom())
            else:
                return e

    def signed_atom(self) -> Expr:
        kind, text, _ = self.peek()
        if kind == "sym" and text == "-":
            self.advance()
            return Unary("neg", self.signed_atom())
        return self.atom()

    def atom(self) -> Expr:
        kind, text, pos = self.advance()
        if kind == "num":
            return Const(float(text))
        if kind == "sym" and text == "(":
            e = self.expr()
            self.expect_sym(")")
            return e
        if kind == "name":
            nxt_kind, nxt_text, _ = self.peek()
            if nxt_kind == "sym" and nxt_text == "(":
                return self.call(text, pos)
            if nxt_kind == "sym" and nxt_text == "[":
                self.advance()
                idx_kind, idx_text, idx_pos = self.advance()
                if idx_kind != "num" or not idx_text.isdigit():
                    raise ParseError("expected a nonnegative integer index", idx_pos)
                self.expect_sym("]")
                return self.var(text, int(idx_text), pos)
            return self.var(text, 0, pos)
        raise ParseError(f"unexpected token {text or 'end of input'!r}", pos)

    def call(self, name, pos) -> Expr:
        if name not in UNARY_FUNCS and name not in NARY_FUNCS:
            raise ParseError(f"unknown function '{name}'", pos)
        self.expect_sym("(")
        args = [self.expr()]
        while True:
            kind, text, _ = self.peek()
            if kind == "sym" and text == ",":
                self.advance()
                args.append(self.expr())
            else:
                break
        self.expect_sym(")")
        if name in UNARY_FUNCS:
            if len(args) != 1:
                raise ParseError(f"'{name}' takes exactly one argument", pos)
            return Unary(name, args[0])
        if len(args) < 2:
            raise ParseError(f"'{name}' takes at least two arguments", pos)
        return MinMax(name, tuple(args))

    def var(self, family, index, pos) -> Expr:
        if family not in self.families:
            raise ParseError(f"reference to undeclared family '{family}'", pos)
        if index >= self.families[family]:
            raise ParseError(
                f"index {index} out of range for family '{family}' "
                f"(length {self.families[family]})",
                pos,
            )
        return Var(family, index)


def parse(source: str, families) -> Expr:
    """Parse ``source`` against the declared variable families.

    ``families`` is a dict name -> length or an iterable of (name, length).
    """
    return _Parser(source, normalize_families(families)).parse()


# ---------------------------------------------------------------------------
# Pretty printing

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_BINOP_SYM = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary) and e.op == "neg":
        return _PREC["neg"]
    if isinstance(e, Const) and e.value < 0:
        return _PREC["neg"]
    return 5


def pretty(e: Expr) -> str:
    """Render the tree so that re-parsing evaluates identically."""
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return f"{e.family}[{e.index}]"
    if isinstance(e, Unary):
        if e.op == "neg":
            inner = pretty(e.arg)
            if _prec(e.arg) < _PREC["neg"]:
                inner = f"({inner})"
            return f"-{inner}"
        return f"{e.op}({pretty(e.arg)})"
    if isinstance(e, MinMax):
        return f"{e.op}({', '.join(pretty(a) for a in e.args)})"
    if isinstance(e, Binary):
        p = _PREC[e.op]
        left = pretty(e.lhs)
        if _prec(e.lhs) < p or (e.op == "pow" and _prec(e.lhs) == p):
            left = f"({left})"
        right = pretty(e.rhs)
        # all binary ops are left-associative, so an equal-precedence right
        # child needs parentheses to survive a round trip
        if _prec(e.rhs) <= p:
            right = f"({right})"
        return f"{left} {_BINOP_SYM[e.op]} {right}"
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# Evaluation


def _lookup(env, family, index, node):
    if family not in env:
        raise EvalError(f"no binding for family '{family}' (needed by '{pretty(node)}')")
    vec = env[family]
    if index >= len(vec):
        raise EvalError(
            f"index {index} out of range for binding '{family}' (length {len(vec)})"
        )
    return float(vec[index])


def evaluate(e: Expr, env: Mapping[str, Sequence[float]]) -> float:
    """Evaluate in IEEE double precision.

    Division by zero and math-domain errors raise EvalError naming the
    offending subexpression; they never propagate silently as NaN.
    """
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return _lookup(env, e.family, e.index, e)
    if isinstance(e, Unary):
        a = evaluate(e.arg, env)
        return _apply_unary(e.op, a, e)
    if isinstance(e, MinMax):
        vals = [evaluate(a, env) for a in e.args]
        return min(vals) if e.op == "min" else max(vals)
    if isinstance(e, Binary):
        a = evaluate(e.lhs, env)
        b = evaluate(e.rhs, env)
        return _apply_binary(e.op, a, b, e)
    raise TypeError(f"not an Expr: {e!r}")


def _apply_unary(op, a, node):
    if op == "neg":
        return -a
    if op == "sin":
        return math.sin(a)
    if op == "cos":
        return math.cos(a)
    if op == "exp":
        try:
            return math.exp(a)
        except OverflowError:
            return math.inf
    if op == "tanh":
        return math.tanh(a)
    if op == "sqrt":
        if a < 0.0:
            raise EvalError(f"sqrt of negative value {a!r} in '{pretty(node)}'")
        return math.sqrt(a)
    if op == "abs":
        return abs(a)
    raise ValueError(f"unknown unary op {op!r}")


def _apply_binary(op, a, b, node):
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        if b == 0.0:
            raise EvalError(f"division by zero in '{pretty(node)}'")
        return a / b
    if op == "pow":
        if a == 0.0 and b < 0.0:
            raise EvalError(f"0 raised to negative power {b!r} in '{pretty(node)}'")
        if a < 0.0 and b != math.floor(b):
            raise EvalError(
                f"negative base {a!r} with non-integer exponent in '{pretty(node)}'"
            )
        try:
            return math.pow(a, b)
        except OverflowError:
            return math.inf
    raise ValueError(f"unknown binary op {op!r}")


# ---------------------------------------------------------------------------
# Structural differentiation (forward mode)


def gradient(e: Expr, family: str, env: Mapping[str, Sequence[float]]) -> np.ndarray:
    """Exact gradient of ``e`` with respect to every component of ``family``.

    abs/min/max are differentiated by their almost-everywhere rule; landing
    exactly on a tie (abs at 0, equal min/max arguments, sqrt at 0) raises
    NonDifferentiableError.
    """
    if family not in env:
        raise EvalError(f"no binding for family '{family}'")
    width = len(env[family])
    _, d = _eval_dual(e, family, width, env)
    return d


def _eval_dual(e: Expr, family, width, env):
    if isinstance(e, Const):
        return e.value, np.zeros(width)
    if isinstance(e, Var):
        v = _lookup(env, e.family, e.index, e)
        d = np.zeros(width)
        if e.family == family:
            d[e.index] = 1.0
        return v, d
    if isinstance(e, Unary):
        a, da = _eval_dual(e.arg, family, width, env)
        v = _apply_unary(e.op, a, e)
        if e.op == "neg":
            return v, -da
        if e.op == "sin":
            return v, math.cos(a) * da
        if e.op == "cos":
            return v, -math.sin(a) * da
        if e.op == "exp":
            return v, v * da
        if e.op == "tanh":
            return v, (1.0 - v * v) * da
        if e.op == "sqrt":
            if a == 0.0:
                raise NonDifferentiableError(f"sqrt not differentiable at 0 in '{pretty(e)}'")
            return v, (0.5 / v) * da
        if e.op == "abs":
            if a == 0.0:
                raise NonDifferentiableError(f"abs not differentiable at 0 in '{pretty(e)}'")
            return v, math.copysign(1.0, a) * da
    if isinstance(e, MinMax):
        pairs = [_eval_dual(a, family, width, env) for a in e.args]
        vals = [p[0] for p in pairs]
        ext = min(vals) if e.op == "min" else max(vals)
        winners = [i for i, v in enumerate(vals) if v == ext]
        if len(winners) > 1:
            raise NonDifferentiableError(
                f"{e.op} has a tie between arguments in '{pretty(e)}'"
            )
        return ext, pairs[winners[0]][1]
    if isinstance(e, Binary):
        a, da = _eval_dual(e.lhs, family, width, env)
        b, db = _eval_dual(e.rhs, family, width, env)
        v = _apply_binary(e.op, a, b, e)
        if e.op == "add":
            return v, da + db
        if e.op == "sub":
            return v, da - db
        if e.op == "mul":
            return v, da * b + a * db
        if e.op == "div":
            return v, (da * b - a * db) / (b * b)
        if e.op == "pow":
            if np.any(db != 0.0):
                if a <= 0.0:
                    raise EvalError(
                        f"d/dx of power needs positive base, got {a!r} in '{pretty(e)}'"
                    )
                return v, v * (db * math.log(a) + b * da / a)
            if b == 0.0:
                return v, np.zeros(width)
            if a == 0.0 and b < 1.0:
                raise NonDifferentiableError(
                    f"power with exponent < 1 not differentiable at base 0 in '{pretty(e)}'"
                )
            return v, b * math.pow(a, b - 1.0) * da
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# Structural rewriting (used by interconnection / repartitioning / composition)


def rename_vars(e: Expr, mapping: Mapping[tuple[str, int], tuple[str, int]]) -> Expr:
    """Return a copy of ``e`` with every variable re-indexed via ``mapping``.

    Every variable occurring in ``e`` must have an entry.
    """
    if isinstance(e, (Const,)):
        return e
    if isinstance(e, Var):
        key = (e.family, e.index)
        if key not in mapping:
            raise EvalError(f"no mapping for variable {e.family}[{e.index}]")
        fam, idx = mapping[key]
        return Var(fam, idx)
    if isinstance(e, Unary):
        return Unary(e.op, rename_vars(e.arg, mapping))
    if isinstance(e, MinMax):
        return MinMax(e.op, tuple(rename_vars(a, mapping) for a in e.args))
    if isinstance(e, Binary):
        return Binary(e.op, rename_vars(e.lhs, mapping), rename_vars(e.rhs, mapping))
    raise TypeError(f"not an Expr: {e!r}")


def variables(e: Expr) -> set[tuple[str, int]]:
    """All (family, index) references occurring in the tree."""
    if isinstance(e, Const):
        return set()
    if isinstance(e, Var):
        return {(e.family, e.index)}
    if isinstance(e, Unary):
        return variables(e.arg)
    if isinstance(e, MinMax):
        out: set[tuple[str, int]] = set()
        for a in e.args:
            out |= variables(a)
        return out
    if isinstance(e, Binary):
        return variables(e.lhs) | variables(e.rhs)
    raise TypeError(f"not an Expr: {e!r}")
