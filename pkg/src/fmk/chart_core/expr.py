"""Arithmetic expressions over chart coordinates and named parameters.

Grammar (EBNF)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = "-" unary | power ;
    power   = atom [ ("^" | "**") unary ] ;
    atom    = number | coord | param | func "(" expr ")" | "(" expr ")" ;
    coord   = ("u" | "t") digit { digit } ;        (* 1-based, <= n *)
    func    = "log" | "exp" | "sqrt" | "sin" | "cos" | "tanh" ;
    number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;

``^`` is right associative and binds tighter than unary minus, so ``-x^2``
is ``-(x^2)``.  ``t1..tn`` are aliases of ``u1..un``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from ..errors import ExprSyntaxError, UnknownSymbolError, ArityError

FUNCTIONS = ("log", "exp", "sqrt", "sin", "cos", "tanh")
_COORD_RE = re.compile(r"^[ut]([1-9][0-9]*)$")


class Expr:
    """Base class for expression nodes (immutable, structurally comparable)."""

    __slots__ = ()

    def __str__(self) -> str:
        return to_string(self)

    # operator sugar, used when building expressions programmatically
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __pow__(self, other):
        return power(self, as_expr(other))

    def __neg__(self):
        return neg(self)


@dataclass(frozen=True, eq=True, repr=True)
class Num(Expr):
    value: float


@dataclass(frozen=True, eq=True, repr=True)
class Param(Expr):
    name: str


@dataclass(frozen=True, eq=True, repr=True)
class Coord(Expr):
    index: int  # 0-based


@dataclass(frozen=True, eq=True, repr=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True, repr=True)
class BinOp(Expr):
    op: str  # one of + - * / ^
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Func(Expr):
    name: str
    arg: Expr


ZERO = Num(0.0)
ONE = Num(1.0)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return num(float(value))


# ---------------------------------------------------------------------------
# smart constructors (light folding only; no general simplification)


def num(value: float) -> Expr:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"non-finite literal {value!r}")
    if value < 0:
        return Neg(Num(-value))
    return Num(value + 0.0)


def _const(e: Expr) -> float | None:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Neg) and isinstance(e.arg, Num):
        return -e.arg.value
    return None


def neg(a: Expr) -> Expr:
    ca = _const(a)
    if ca is not None:
        return num(-ca)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Expr, b: Expr) -> Expr:
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        return num(ca + cb)
    if ca == 0.0:
        return b
    if cb == 0.0:
        return a
    if isinstance(b, Neg):
        return BinOp("-", a, b.arg)
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        return num(ca - cb)
    if cb == 0.0:
        return a
    if ca == 0.0:
        return neg(b)
    if isinstance(b, Neg):
        return BinOp("+", a, b.arg)
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        return num(ca * cb)
    if ca == 0.0 or cb == 0.0:
        return ZERO
    if ca == 1.0:
        return b
    if cb == 1.0:
        return a
    if ca == -1.0:
        return neg(b)
    if cb == -1.0:
        return neg(a)
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    ca, cb = _const(a), _const(b)
    if cb == 0.0:
        raise ZeroDivisionError("division by literal zero")
    if ca == 0.0:
        return ZERO
    if ca is not None and cb is not None:
        return num(ca / cb)
    if cb == 1.0:
        return a
    return BinOp("/", a, b)


def power(a: Expr, b: Expr) -> Expr:
    cb = _const(b)
    if cb == 0.0:
        return ONE
    if cb == 1.0:
        return a
    ca = _const(a)
    if ca is not None and cb is not None and (ca > 0 or float(cb).is_integer()):
        return num(ca**cb)
    return BinOp("^", a, b)


def func(name: str, a: Expr) -> Expr:
    if name not in FUNCTIONS:
        raise UnknownSymbolError(f"unknown function {name!r}", 0)
    return Func(name, a)


def coord(i: int) -> Coord:
    """Coordinate symbol, 1-based like the printed names."""
    return Coord(i - 1)


# ---------------------------------------------------------------------------
# tokenizer / parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    text_len = len(text)
    while pos < text_len:
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[start]!r}", start)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", text_len))
    return tokens


class _Parser:
    def __init__(self, text: str, n: int, params: Iterable[str]):
        self.text = text
        self.n = n
        self.params = set(params)
        for p in self.params:
            if _COORD_RE.match(p) or p in FUNCTIONS:
                raise ValueError(f"parameter name {p!r} collides with a reserved symbol")
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value:
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", pos)
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] in ("^", "**"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                if self.peek()[1] == ",":
                    raise ArityError(f"{val} takes exactly one argument", self.peek()[2])
                self.expect(")")
                return Func(val, arg)
            m = _COORD_RE.match(val)
            if m:
                idx = int(m.group(1))
                if idx > self.n:
                    raise UnknownSymbolError(
                        f"coordinate {val!r} out of range for dimension {self.n}", pos
                    )
                if self.peek()[1] == "(":
                    raise ArityError(f"{val!r} is not a function", self.peek()[2])
                return Coord(idx - 1)
            if val in self.params:
                if self.peek()[1] == "(":
                    raise ArityError(f"{val!r} is not a function", self.peek()[2])
                return Param(val)
            raise UnknownSymbolError(f"unknown symbol {val!r}", pos)
        if val == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", pos)


def parse_expr(text: str, n: int, params: Sequence[str] = ()) -> Expr:
    """Parse ``text`` into an expression tree over ``u1..un`` and ``params``."""
    if not isinstance(text, str):
        raise TypeError("expression text must be a string")
    return _Parser(text, n, params).parse()


# ---------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _PREC["neg"]
    return _PREC["atom"]


def _fmt_num(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_string(e: Expr) -> str:
    """Print with the minimal parentheses that re-parse to the same tree."""
    if isinstance(e, Num):
        if e.value < 0:
            # only reachable for hand-built trees
            return f"(0-{_fmt_num(-e.value)})"
        return _fmt_num(e.value)
    if isinstance(e, Param):
        return e.name
    if isinstance(e, Coord):
        return f"u{e.index + 1}"
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    if isinstance(e, Neg):
        inner = to_string(e.arg)
        if _prec(e.arg) < _PREC["neg"]:
            inner = f"({inner})"
        return "-" + inner
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        ls, rs = to_string(e.left), to_string(e.right)
        if e.op == "^":
            if _prec(e.left) <= p:
                ls = f"({ls})"
            if _prec(e.right) < p and not isinstance(e.right, Neg):
                rs = f"({rs})"
        else:
            if _prec(e.left) < p:
                ls = f"({ls})"
            if _prec(e.right) <= p:
                rs = f"({rs})"
        return f"{ls}{e.op}{rs}"
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# structural queries


def free_coords(e: Expr) -> set[int]:
    if isinstance(e, Coord):
        return {e.index}
    if isinstance(e, (Num, Param)):
        return set()
    if isinstance(e, (Neg, Func)):
        return free_coords(e.arg)
    return free_coords(e.left) | free_coords(e.right)


def free_params(e: Expr) -> set[str]:
    if isinstance(e, Param):
        return {e.name}
    if isinstance(e, (Num, Coord)):
        return set()
    if isinstance(e, (Neg, Func)):
        return free_params(e.arg)
    return free_params(e.left) | free_params(e.right)


def is_zero(e: Expr) -> bool:
    return _const(e) == 0.0


def log_of_square(e: Func) -> Expr | None:
    """``log(a^2)`` is read as ``2*log(a)`` (real branch, a > 0 on the chart)."""
    arg = e.arg
    if (
        e.name == "log"
        and isinstance(arg, BinOp)
        and arg.op == "^"
        and _const(arg.right) == 2.0
    ):
        return arg.left
    return None


def substitute(e: Expr, params: Mapping[str, float]) -> Expr:
    """Replace named parameters by numeric literals."""
    if isinstance(e, Param):
        if e.name in params:
            return num(params[e.name])
        return e
    if isinstance(e, (Num, Coord)):
        return e
    if isinstance(e, Neg):
        return neg(substitute(e.arg, params))
    if isinstance(e, Func):
        return Func(e.name, substitute(e.arg, params))
    return _rebuild(e.op, substitute(e.left, params), substitute(e.right, params))


def _rebuild(op: str, a: Expr, b: Expr) -> Expr:
    return {"+": add, "-": sub, "*": mul, "/": div, "^": power}[op](a, b)


# ---------------------------------------------------------------------------
# symbolic differentiation


def diff(e: Expr, i: int) -> Expr:
    """Exact partial derivative with respect to the 0-based coordinate ``i``."""
    if isinstance(e, (Num, Param)):
        return ZERO
    if isinstance(e, Coord):
        return ONE if e.index == i else ZERO
    if i not in free_coords(e):
        return ZERO
    if isinstance(e, Neg):
        return neg(diff(e.arg, i))
    if isinstance(e, Func):
        a = e.arg
        da = diff(a, i)
        name = e.name
        if name == "log":
            base = log_of_square(e)
            if base is not None:
                return mul(num(2.0), div(diff(base, i), base))
            return div(da, a)
        if name == "exp":
            return mul(e, da)
        if name == "sqrt":
            return div(da, mul(num(2.0), e))
        if name == "sin":
            return mul(Func("cos", a), da)
        if name == "cos":
            return neg(mul(Func("sin", a), da))
        if name == "tanh":
            return mul(sub(ONE, power(e, num(2.0))), da)
        raise UnknownSymbolError(f"unknown function {name!r}", 0)
    a, b = e.left, e.right
    op = e.op
    if op == "+":
        return add(diff(a, i), diff(b, i))
    if op == "-":
        return sub(diff(a, i), diff(b, i))
    if op == "*":
        return add(mul(diff(a, i), b), mul(a, diff(b, i)))
    if op == "/":
        db = diff(b, i)
        if is_zero(db):
            return div(diff(a, i), b)
        return sub(div(diff(a, i), b), div(mul(a, db), power(b, num(2.0))))
    if op == "^":
        if i not in free_coords(b):
            cb = _const(b)
            lowered = num(cb - 1.0) if cb is not None else sub(b, ONE)
            return mul(mul(b, power(a, lowered)), diff(a, i))
        # a^b = exp(b log a)
        return mul(e, add(mul(diff(b, i), Func("log", a)), div(mul(b, diff(a, i)), a)))
    raise TypeError(f"not an expression: {e!r}")


def node_count(e: Expr) -> int:
    if isinstance(e, (Num, Param, Coord)):
        return 1
    if isinstance(e, (Neg, Func)):
        return 1 + node_count(e.arg)
    return 1 + node_count(e.left) + node_count(e.right)
