"""Arithmetic expressions over state and input coordinates.

Grammar, loosest binding first::

    sum     := product (("+" | "-") product)*
    product := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" unary)?            # right associative
    atom    := NUMBER | NAME ("[" INT "]")? | FUNC "(" sum ")" | "(" sum ")"

So ``-x^2`` is ``-(x^2)`` and ``2^-1`` is ``2^(-1)``.  Evaluation never
raises on domain errors: it yields ``nan`` or ``inf`` the way IEEE
arithmetic would, and callers check finiteness.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Union


class ExprError(ValueError):
    def __init__(self, message, col=None):
        super().__init__(message if col is None else f"{message} (column {col})")
        self.col = col
        self.bare = message


def _div(a, b):
    try:
        return a / b
    except ZeroDivisionError:
        if a == 0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)


def _pow(a, b):
    try:
        return math.pow(a, b)
    except ValueError:
        return math.nan
    except OverflowError:
        return math.inf if a > 0 or float(b).is_integer() and int(b) % 2 == 0 else -math.inf


def _guard(fn):
    def wrapped(x):
        try:
            return fn(x)
        except ValueError:
            return math.nan
        except OverflowError:
            return math.inf
    return wrapped


def _log(x):
    if x == 0:
        return -math.inf
    return math.log(x)


FUNCTIONS: dict[str, Callable[[float], float]] = {
    "sin": _guard(math.sin),
    "cos": _guard(math.cos),
    "exp": _guard(math.exp),
    "log": _guard(_log),
    "tanh": math.tanh,
    "sqrt": _guard(math.sqrt),
    "abs": abs,
}

BINARY: dict[str, Callable[[float, float], float]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _div,
    "^": _pow,
}

PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str
    index: int | None = None

    @property
    def key(self) -> tuple[str, int]:
        return self.name, self.index or 0


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]

# -- tokenizer -------------------------------------------------------------

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
      | (?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*)
      | (?P<op>[-+*/^()\[\]])
    )""",
    re.VERBOSE,
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise ExprError(f"unexpected character {text[col - 1]!r}", col)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text, scope):
        self.toks = _tokenize(text)
        self.i = 0
        self.scope = scope

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, v, col = self.take()
        if v != value:
            raise ExprError(f"expected {value!r} but found {v or 'end of input'!r}", col)

    def parse(self):
        e = self.sum()
        kind, v, col = self.peek()
        if kind != "end":
            raise ExprError(f"unexpected {v!r}", col)
        return e

    def sum(self):
        e = self.product()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.product())
        return e

    def product(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.unary())
        return e

    def unary(self):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            arg = self.unary()
            # "-0.1" is a negative literal, not a negation node
            if isinstance(arg, Num):
                return Num(-arg.value)
            return Neg(arg)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, v, col = self.take()
        if kind == "num":
            return Num(float(v))
        if kind == "name":
            if self.peek()[1] == "(":
                if v not in FUNCTIONS:
                    raise ExprError(f"unknown function {v!r}", col)
                self.take()
                arg = self.sum()
                self.expect(")")
                return Call(v, arg)
            index = None
            if self.peek()[1] == "[":
                self.take()
                k, iv, icol = self.take()
                if k != "num" or not iv.isdigit():
                    raise ExprError("component index must be a non-negative integer", icol)
                index = int(iv)
                self.expect("]")
            if v in FUNCTIONS and v not in (self.scope or {}):
                raise ExprError(f"function {v!r} needs an argument", col)
            self._resolve(v, index, col)
            return Var(v, index)
        if v == "(":
            e = self.sum()
            self.expect(")")
            return e
        raise ExprError(f"unexpected {v or 'end of input'!r}", col)

    def _resolve(self, name, index, col):
        if self.scope is None:
            return
        if name not in self.scope:
            raise ExprError(f"unknown identifier {name!r}", col)
        dim = self.scope[name]
        if index is None and dim != 1:
            raise ExprError(f"{name!r} has {dim} components; write {name}[i]", col)
        if index is not None and not 0 <= index < dim:
            raise ExprError(f"component {index} out of range for {name!r} (dim {dim})", col)


def parse_expr(text: str, scope: Mapping[str, int] | None = None) -> Expr:
    """Parse ``text``; ``scope`` maps each legal variable name to its dimension."""
    return _Parser(text, scope).parse()


# -- evaluation ------------------------------------------------------------

def evaluate(e: Expr, env: Mapping) -> float:
    """Tree-walking evaluation; ``env`` maps names to floats or sequences."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        v = env[e.name]
        return float(v if e.index is None and not hasattr(v, "__len__") else v[e.index or 0])
    if isinstance(e, Neg):
        return -evaluate(e.arg, env)
    if isinstance(e, BinOp):
        return BINARY[e.op](evaluate(e.left, env), evaluate(e.right, env))
    if isinstance(e, Call):
        return FUNCTIONS[e.fn](evaluate(e.arg, env))
    raise TypeError(f"not an expression: {e!r}")


def compile_expr(e: Expr, positions: Mapping[tuple[str, int], int]) -> Callable:
    """Closure evaluating ``e`` on a flat vector; ``positions`` maps ``(name, component)`` to an index."""
    if isinstance(e, Num):
        c = e.value
        return lambda v: c
    if isinstance(e, Var):
        i = positions[e.key]
        return lambda v: float(v[i])
    if isinstance(e, Neg):
        f = compile_expr(e.arg, positions)
        return lambda v: -f(v)
    if isinstance(e, BinOp):
        l, r = compile_expr(e.left, positions), compile_expr(e.right, positions)
        op = BINARY[e.op]
        if e.op == "+":
            return lambda v: l(v) + r(v)
        if e.op == "-":
            return lambda v: l(v) - r(v)
        if e.op == "*":
            return lambda v: l(v) * r(v)
        return lambda v: op(l(v), r(v))
    if isinstance(e, Call):
        f, fn = compile_expr(e.arg, positions), FUNCTIONS[e.fn]
        return lambda v: fn(f(v))
    raise TypeError(f"not an expression: {e!r}")


def variables(e: Expr) -> set[Var]:
    if isinstance(e, Var):
        return {e}
    if isinstance(e, Neg | Call):
        return variables(e.arg)
    if isinstance(e, BinOp):
        return variables(e.left) | variables(e.right)
    return set()


def substitute(e: Expr, fn: Callable[[Var], Expr]) -> Expr:
    """Replace every variable ``x`` by ``fn(x)``."""
    if isinstance(e, Var):
        return fn(e)
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, fn))
    if isinstance(e, Call):
        return Call(e.fn, substitute(e.arg, fn))
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, fn), substitute(e.right, fn))
    return e


def is_constant(e: Expr) -> bool:
    return not variables(e)


# -- printing --------------------------------------------------------------

def format_number(x: float) -> str:
    """Shortest text that parses back to exactly ``x``."""
    if math.isnan(x) or math.isinf(x):
        raise ExprError(f"cannot write non-finite constant {x}")
    r = repr(float(x))
    if r == "-0.0":
        return r  # "-0" would read back as the integer 0
    return r[:-2] if r.endswith(".0") else r


def to_text(e: Expr) -> str:
    """Render with the fewest parentheses that reparse to the same tree."""
    return _text(e, 0)


def _text(e, ctx):
    if isinstance(e, Num):
        s = format_number(e.value)
        if s.startswith("-") and ctx > PRECEDENCE["neg"]:
            return f"({s})"
        return s
    if isinstance(e, Var):
        return e.name if e.index is None else f"{e.name}[{e.index}]"
    if isinstance(e, Call):
        return f"{e.fn}({_text(e.arg, 0)})"
    if isinstance(e, Neg):
        s = "-" + _text(e.arg, PRECEDENCE["neg"])
        return f"({s})" if ctx > PRECEDENCE["neg"] else s
    p = PRECEDENCE[e.op]
    if e.op == "^":
        s = f"{_text(e.left, p + 1)}^{_text(e.right, PRECEDENCE['neg'])}"
    else:
        s = f"{_text(e.left, p)} {e.op} {_text(e.right, p + 1)}"
    return f"({s})" if ctx > p else s


# -- light simplification used when emitting composed systems --------------

def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and a.value == 0:
        return b
    if isinstance(b, Num) and b.value == 0:
        return a
    return BinOp("+", a, b)


def mul(c: float, e: Expr) -> Expr:
    if c == 1:
        return e
    if isinstance(e, Num):
        return Num(c * e.value)
    return BinOp("*", Num(c), e)


def linear_combination(terms) -> Expr:
    """``sum(c * e)`` over nonzero ``c``; ``0`` when empty."""
    out: Expr = Num(0.0)
    for c, e in terms:
        if c != 0:
            out = add(out, mul(c, e))
    return out
