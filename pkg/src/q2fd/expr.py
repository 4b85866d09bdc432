"""A small arithmetic expression language for coefficients and exact solutions.

Grammar, loosest binding first::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" INTEGER)*
    atom   := NUMBER | NAME | NAME "(" expr ")" | "(" expr ")"

Names are the variables ``x``, ``y``, ``z`` and the constant ``pi``; the
functions are ``sin``, ``cos`` and ``exp``.  Exponents are nonnegative integer
literals, which keeps :func:`differentiate` closed over the language.
"""

import math
import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Expr", "Num", "Var", "Const", "Neg", "BinOp", "Pow", "Call",
    "ExprSyntaxError", "parse", "differentiate", "to_string", "as_expr",
]

VARIABLES = ("x", "y", "z")
CONSTANTS = {"pi": math.pi}
FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_NEG_PREC = 3
_POW_PREC = 4
_ATOM_PREC = 5


class ExprSyntaxError(ValueError):
    """Parse failure; ``column`` is 1-based."""

    def __init__(self, message, column):
        super().__init__(f"{message} at column {column}")
        self.column = column


class Expr:
    """Base class of the immutable expression tree."""

    prec = _ATOM_PREC

    def eval(self, env):
        raise NotImplementedError

    def __call__(self, *coords):
        """Evaluate with positional coordinates ``x, y, z``."""
        if len(coords) > len(VARIABLES):
            raise TypeError("at most three coordinates")
        return self.eval(dict(zip(VARIABLES, coords)))

    def variables(self):
        return frozenset()

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def eval(self, env):
        return self.value


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def eval(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise ValueError(f"no value for variable {self.name!r}") from None

    def variables(self):
        return frozenset({self.name})


@dataclass(frozen=True)
class Const(Expr):
    name: str

    def eval(self, env):
        return CONSTANTS[self.name]


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr
    prec = _NEG_PREC

    def eval(self, env):
        return -self.arg.eval(env)

    def variables(self):
        return self.arg.variables()


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    @property
    def prec(self):
        return _PREC[self.op]

    def eval(self, env):
        lhs = self.left.eval(env)
        rhs = self.right.eval(env)
        if self.op == "+":
            return lhs + rhs
        if self.op == "-":
            return lhs - rhs
        if self.op == "*":
            return lhs * rhs
        if np.any(np.asarray(rhs) == 0):
            raise ZeroDivisionError(f"division by zero in {to_string(self)}")
        return lhs / rhs

    def variables(self):
        return self.left.variables() | self.right.variables()


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int
    prec = _POW_PREC

    def eval(self, env):
        return self.base.eval(env) ** self.exponent

    def variables(self):
        return self.base.variables()


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    arg: Expr

    def eval(self, env):
        return FUNCTIONS[self.fn](self.arg.eval(env))

    def variables(self):
        return self.arg.variables()


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise ExprSyntaxError(f"unexpected character {text[col - 1]!r}", col)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start + 1))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, col = self.take()
        if val != value or kind != "op":
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", col)

    def parse(self):
        node = self.expr()
        kind, val, col = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", col)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        while self.peek()[:2] == ("op", "^"):
            self.take()
            kind, val, col = self.take()
            if kind != "num" or not re.fullmatch(r"\d+", val):
                what = "end of input" if kind == "end" else repr(val)
                raise ExprSyntaxError(f"exponent must be a nonnegative integer literal, found {what}", col)
            node = Pow(node, int(val))
        return node

    def atom(self):
        kind, val, col = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if val in VARIABLES:
                return Var(val)
            if val in CONSTANTS:
                return Const(val)
            raise ExprSyntaxError(f"unknown identifier {val!r}", col)
        if (kind, val) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", col)


def parse(text):
    """Parse ``text`` into an :class:`Expr`.

    Raises :class:`ExprSyntaxError` with a 1-based column on bad input.

    >>> parse("sin(pi*x)+x^3")(0.5)
    1.125
    """
    return _Parser(str(text)).parse()


def as_expr(value):
    """Coerce a string, number or :class:`Expr` to an :class:`Expr`."""
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)):
        return Num(float(value))
    return parse(value)


def _fmt_num(v):
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_string(e):
    """Print with the fewest parentheses that keep the tree shape on re-parse."""
    if isinstance(e, Num):
        s = _fmt_num(abs(e.value))
        return f"(-{s})" if e.value < 0 or math.copysign(1.0, e.value) < 0 else s
    if isinstance(e, (Var, Const)):
        return e.name
    if isinstance(e, Call):
        return f"{e.fn}({to_string(e.arg)})"
    if isinstance(e, Neg):
        inner = to_string(e.arg)
        return "-" + (f"({inner})" if e.arg.prec < _NEG_PREC else inner)
    if isinstance(e, Pow):
        inner = to_string(e.base)
        if e.base.prec <= _POW_PREC or (isinstance(e.base, Num) and e.base.value < 0):
            inner = f"({inner})"
        return f"{inner}^{e.exponent}"
    if isinstance(e, BinOp):
        lhs = to_string(e.left)
        rhs = to_string(e.right)
        if e.left.prec < e.prec:
            lhs = f"({lhs})"
        if e.right.prec <= e.prec:
            rhs = f"({rhs})"
        return f"{lhs}{e.op}{rhs}"
    raise TypeError(f"not an expression: {e!r}")


ZERO = Num(0.0)
ONE = Num(1.0)


def _is(e, v):
    return isinstance(e, Num) and e.value == v


def add(a, b):
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return BinOp("+", a, b)


def sub(a, b):
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    return BinOp("-", a, b)


def mul(a, b):
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return BinOp("*", a, b)


def div(a, b):
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return BinOp("/", a, b)


def neg(a):
    if isinstance(a, Num):
        return Num(-a.value) if a.value != 0 else ZERO
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(a, n):
    if n == 0:
        return ONE
    if n == 1:
        return a
    return Pow(a, n)


def differentiate(e, var):
    """Symbolic derivative of ``e`` with respect to the variable ``var``."""
    if isinstance(var, Var):
        var = var.name
    if var not in e.variables():
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == var else ZERO
    if isinstance(e, Neg):
        return neg(differentiate(e.arg, var))
    if isinstance(e, BinOp):
        da = differentiate(e.left, var)
        db = differentiate(e.right, var)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, e.right), mul(e.left, db))
        # (a/b)' = a'/b - a b' / b^2
        return sub(div(da, e.right), div(mul(e.left, db), power(e.right, 2)))
    if isinstance(e, Pow):
        return mul(mul(Num(float(e.exponent)), power(e.base, e.exponent - 1)),
                   differentiate(e.base, var))
    if isinstance(e, Call):
        inner = differentiate(e.arg, var)
        if e.fn == "sin":
            outer = Call("cos", e.arg)
        elif e.fn == "cos":
            outer = neg(Call("sin", e.arg))
        else:
            outer = e
        return mul(outer, inner)
    return ZERO
