"""Scalar expressions of ``t``: parsing, evaluation and symbolic differentiation.

The grammar is small on purpose::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right associative, binds tighter than unary minus
    atom    := NUMBER | 't' | 'pi' | 'e' | FUNC '(' expr ')' | '(' expr ')'

``FUNC`` is one of ``sin, cos, exp, ln, sqrt``. ``**`` is accepted as an alias of ``^``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt")
CONSTANTS = {"pi": math.pi, "e": math.e}


class ParseError(ValueError):
    """Malformed expression text.

    Attributes:
        offset: character offset into the input where parsing failed.
        expected: short summary of the tokens that would have been accepted.
    """

    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        self.offset = offset
        self.expected = expected
        detail = f" (expected {', '.join(expected)})" if expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class EvalDomainError(ArithmeticError):
    """Evaluation left the real domain (ln of non-positive, 1/0, ...)."""

    def __init__(self, message: str, t: float):
        self.t = float(t)
        super().__init__(f"{message} at t={self.t!r}")


class DifferentiationError(ValueError):
    pass


class Expr:
    """Base class of the immutable expression tree."""

    __slots__ = ()

    def __str__(self) -> str:
        return to_string(self)

    def __call__(self, t):
        return evaluate(self, t)


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    pass


@dataclass(frozen=True)
class Named(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


T = Var()
ZERO = Const(0.0)
ONE = Const(1.0)

# --------------------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>\*\*|[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        value = m.group(kind)
        tokens.append((kind, "^" if value == "**" else value, m.start(kind)))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, off = self.take()
        if val != value or kind == "eof":
            raise ParseError(f"unexpected {val or 'end of input'!s}", off, (repr(value),))

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, off = self.peek()
        if kind != "eof":
            raise ParseError(f"unexpected {val!r}", off, ("operator", "end of input"))
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        if self.peek()[:2] == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, val, off = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if val == "t":
                return T
            if val in CONSTANTS:
                return Named(val)
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            raise ParseError(f"unknown identifier {val!r}", off)
        if val == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(
            f"unexpected {val or 'end of input'}", off, ("number", "t", "function", "'('")
        )


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree; raises :class:`ParseError`."""
    return _Parser(text).parse()


def as_expr(value: Union[str, float, int, Expr]) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse(value)
    return Const(float(value))


# ------------------------------------------------------------------------ evaluation


def _first_bad(t: np.ndarray, mask: np.ndarray) -> float:
    t = np.broadcast_to(t, mask.shape)
    return float(t[mask][0]) if mask.ndim else float(t)


def _eval(e: Expr, t: np.ndarray) -> np.ndarray:
    if isinstance(e, Const):
        return np.full_like(t, e.value)
    if isinstance(e, Var):
        return t
    if isinstance(e, Named):
        return np.full_like(t, CONSTANTS[e.name])
    if isinstance(e, Neg):
        return -_eval(e.arg, t)
    if isinstance(e, Call):
        x = _eval(e.arg, t)
        if e.func == "sin":
            return np.sin(x)
        if e.func == "cos":
            return np.cos(x)
        if e.func == "exp":
            return np.exp(x)
        if e.func == "ln":
            bad = x <= 0
            if np.any(bad):
                raise EvalDomainError("ln of non-positive value", _first_bad(t, bad))
            return np.log(x)
        if e.func == "sqrt":
            bad = x < 0
            if np.any(bad):
                raise EvalDomainError("sqrt of negative value", _first_bad(t, bad))
            return np.sqrt(x)
        raise ValueError(f"unknown function {e.func!r}")
    if isinstance(e, BinOp):
        x = _eval(e.left, t)
        y = _eval(e.right, t)
        if e.op == "+":
            return x + y
        if e.op == "-":
            return x - y
        if e.op == "*":
            return x * y
        if e.op == "/":
            bad = y == 0
            if np.any(bad):
                raise EvalDomainError("division by zero", _first_bad(t, bad))
            return x / y
        if e.op == "^":
            integral = y == np.round(y)
            bad = (x < 0) & ~integral
            if np.any(bad):
                raise EvalDomainError("negative base with non-integer exponent", _first_bad(t, bad))
            bad = (x == 0) & (y < 0)
            if np.any(bad):
                raise EvalDomainError("division by zero", _first_bad(t, bad))
            return np.power(x, y)
    raise TypeError(f"not an expression node: {e!r}")


def evaluate(e: Expr, t):
    """Evaluate ``e`` at ``t`` (a float or an array of floats).

    Raises:
        EvalDomainError: if any point leaves the real domain or produces a non-finite value.
    """
    arr = np.asarray(t, dtype=float)
    with np.errstate(all="ignore"):
        out = _eval(e, arr)
    bad = ~np.isfinite(out)
    if np.any(bad):
        raise EvalDomainError("non-finite value", _first_bad(arr, bad))
    if arr.ndim == 0:
        return float(out)
    return out


# ------------------------------------------------------------- construction helpers
# Constant folding happens here and nowhere else.


def _c(e: Expr):
    return e.value if isinstance(e, Const) else None


def add(a: Expr, b: Expr) -> Expr:
    ca, cb = _c(a), _c(b)
    if ca is not None and cb is not None:
        return Const(ca + cb)
    if ca == 0:
        return b
    if cb == 0:
        return a
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    ca, cb = _c(a), _c(b)
    if ca is not None and cb is not None:
        return Const(ca - cb)
    if cb == 0:
        return a
    if ca == 0:
        return neg(b)
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    ca, cb = _c(a), _c(b)
    if ca is not None and cb is not None:
        return Const(ca * cb)
    if ca == 0 or cb == 0:
        return ZERO
    if ca == 1:
        return b
    if cb == 1:
        return a
    if ca == -1:
        return neg(b)
    if cb == -1:
        return neg(a)
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    ca, cb = _c(a), _c(b)
    if ca is not None and cb is not None and cb != 0:
        return Const(ca / cb)
    if ca == 0 and cb != 0:
        return ZERO
    if cb == 1:
        return a
    return BinOp("/", a, b)


def power(a: Expr, b: Expr) -> Expr:
    ca, cb = _c(a), _c(b)
    if ca is not None and cb is not None and (ca > 0 or float(cb).is_integer()) and ca != 0:
        return Const(ca**cb)
    if cb == 1:
        return a
    if cb == 0:
        return ONE
    return BinOp("^", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def call(func: str, a: Expr) -> Expr:
    return Call(func, a)


def is_constant(e: Expr) -> bool:
    if isinstance(e, Var):
        return False
    if isinstance(e, (Const, Named)):
        return True
    if isinstance(e, Neg):
        return is_constant(e.arg)
    if isinstance(e, Call):
        return is_constant(e.arg)
    return is_constant(e.left) and is_constant(e.right)


def substitute(e: Expr, replacement: Expr) -> Expr:
    """Replace every occurrence of ``t`` by ``replacement``."""
    if isinstance(e, Var):
        return replacement
    if isinstance(e, (Const, Named)):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, replacement))
    if isinstance(e, Call):
        return Call(e.func, substitute(e.arg, replacement))
    return BinOp(e.op, substitute(e.left, replacement), substitute(e.right, replacement))


def shift(e: Expr, offset: float) -> Expr:
    """The expression ``e(t + offset)``."""
    if offset == 0:
        return e
    return substitute(e, add(T, Const(float(offset))))


# ------------------------------------------------------------------ differentiation


def differentiate(e: Expr) -> Expr:
    """Exact derivative with respect to ``t``, with constant folding only."""
    if isinstance(e, Var):
        return ONE
    if isinstance(e, (Const, Named)):
        return ZERO
    if isinstance(e, Neg):
        return neg(differentiate(e.arg))
    if isinstance(e, Call):
        u = e.arg
        du = differentiate(u)
        if _c(du) == 0:
            return ZERO
        if e.func == "sin":
            return mul(call("cos", u), du)
        if e.func == "cos":
            return neg(mul(call("sin", u), du))
        if e.func == "exp":
            return mul(e, du)
        if e.func == "ln":
            return div(du, u)
        if e.func == "sqrt":
            return div(du, mul(Const(2.0), e))
        raise DifferentiationError(f"unknown function {e.func!r}")
    f, g = e.left, e.right
    if e.op in ("+", "-"):
        df, dg = differentiate(f), differentiate(g)
        return add(df, dg) if e.op == "+" else sub(df, dg)
    if e.op == "*":
        return add(mul(differentiate(f), g), mul(f, differentiate(g)))
    if e.op == "/":
        df, dg = differentiate(f), differentiate(g)
        if _c(dg) == 0:
            return div(df, g)
        return div(sub(mul(df, g), mul(f, dg)), power(g, Const(2.0)))
    if e.op == "^":
        if not is_constant(g):
            raise DifferentiationError(
                f"cannot differentiate {to_string(e)}: exponent depends on t"
            )
        df = differentiate(f)
        if _c(df) == 0:
            return ZERO
        return mul(mul(g, power(f, sub(g, ONE))), df)
    raise DifferentiationError(f"unknown operator {e.op!r}")


# ------------------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg) or (isinstance(e, Const) and math.copysign(1.0, e.value) < 0):
        return 3
    return 5


def _wrap(e: Expr, min_prec: int) -> str:
    s = to_string(e)
    return f"({s})" if _prec(e) < min_prec else s


def to_string(e: Expr) -> str:
    """Render ``e`` so that :func:`parse` rebuilds an identically evaluating tree."""
    if isinstance(e, Const):
        return repr(float(e.value))
    if isinstance(e, Var):
        return "t"
    if isinstance(e, Named):
        return e.name
    if isinstance(e, Neg):
        return "-" + _wrap(e.arg, 3)
    if isinstance(e, Call):
        return f"{e.func}({to_string(e.arg)})"
    p = _PREC[e.op]
    if e.op == "^":
        return f"{_wrap(e.left, 5)}^{_wrap(e.right, 3)}"
    return f"{_wrap(e.left, p)} {e.op} {_wrap(e.right, p + 1)}"
