"""Scalar expression trees for model right-hand sides.

Grammar, precedence low to high ('^' is right-associative and binds
tighter than unary minus):

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

NUMBER is a decimal literal with an optional exponent part; IDENT is
``[A-Za-z_][A-Za-z0-9_]*``.  The only built-in functions are ``exp`` and
``ln``.  So ``-(x*y)^2`` parses as Neg(Pow(Mul(x, y), 2)) and ``x^y^z``
as Pow(x, Pow(y, z)).

Trees are immutable.  Evaluation is plain IEEE-double arithmetic;
division by zero, ``ln`` of a non-positive value, overflow and any other
non-finite intermediate raise NonFiniteError instead of propagating
inf/nan.  Differentiation is symbolic and applies local constant folding
only (0*u -> 0, u+0 -> u, constant subtrees collapsed); general powers
u^v with a non-constant exponent are differentiated through the
exp(v*ln u) rewrite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .errors import ExprSyntaxError, NonFiniteError, UnboundNameError

__all__ = [
    "Expr",
    "Const",
    "Var",
    "Param",
    "Neg",
    "Exp",
    "Ln",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Pow",
    "parse",
    "differentiate",
    "to_source",
]

_EMPTY: Mapping[str, float] = {}


def _finite(v: float, what: str) -> float:
    if not math.isfinite(v):
        raise NonFiniteError(f"non-finite value in {what}: {v!r}")
    return v


@dataclass(frozen=True)
class Expr:
    """Base class for expression nodes."""

    def evaluate(self, point: Mapping[str, float], params: Mapping[str, float] | None = None) -> float:
        raise NotImplementedError

    def diff(self, wrt: str) -> "Expr":
        raise NotImplementedError

    def names(self) -> frozenset[str]:
        """Free variable and parameter names in the tree."""
        raise NotImplementedError

    def __str__(self) -> str:
        return to_source(self)


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def evaluate(self, point, params=None):
        return self.value

    def diff(self, wrt):
        return _ZERO

    def names(self):
        return frozenset()


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def evaluate(self, point, params=None):
        try:
            return point[self.name]
        except KeyError:
            raise UnboundNameError(self.name) from None

    def diff(self, wrt):
        return _ONE if self.name == wrt else _ZERO

    def names(self):
        return frozenset((self.name,))


@dataclass(frozen=True)
class Param(Expr):
    """A named constant, bound to a number by the owning model."""

    name: str

    def evaluate(self, point, params=None):
        try:
            return (params or _EMPTY)[self.name]
        except KeyError:
            raise UnboundNameError(self.name) from None

    def diff(self, wrt):
        return _ZERO

    def names(self):
        return frozenset((self.name,))


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def evaluate(self, point, params=None):
        return -self.arg.evaluate(point, params)

    def diff(self, wrt):
        return neg(self.arg.diff(wrt))

    def names(self):
        return self.arg.names()


@dataclass(frozen=True)
class Exp(Expr):
    arg: Expr

    def evaluate(self, point, params=None):
        try:
            return math.exp(self.arg.evaluate(point, params))
        except OverflowError:
            raise NonFiniteError("overflow in exp") from None

    def diff(self, wrt):
        return mul(self.arg.diff(wrt), self)

    def names(self):
        return self.arg.names()


@dataclass(frozen=True)
class Ln(Expr):
    arg: Expr

    def evaluate(self, point, params=None):
        v = self.arg.evaluate(point, params)
        try:
            return math.log(v)
        except ValueError:
            raise NonFiniteError(f"ln of non-positive value {v!r}") from None

    def diff(self, wrt):
        return div(self.arg.diff(wrt), self.arg)

    def names(self):
        return self.arg.names()


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr

    def evaluate(self, point, params=None):
        return _finite(self.left.evaluate(point, params) + self.right.evaluate(point, params), "addition")

    def diff(self, wrt):
        return add(self.left.diff(wrt), self.right.diff(wrt))

    def names(self):
        return self.left.names() | self.right.names()


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr

    def evaluate(self, point, params=None):
        return _finite(self.left.evaluate(point, params) - self.right.evaluate(point, params), "subtraction")

    def diff(self, wrt):
        return sub(self.left.diff(wrt), self.right.diff(wrt))

    def names(self):
        return self.left.names() | self.right.names()


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr

    def evaluate(self, point, params=None):
        return _finite(self.left.evaluate(point, params) * self.right.evaluate(point, params), "multiplication")

    def diff(self, wrt):
        # product rule
        return add(mul(self.left.diff(wrt), self.right), mul(self.left, self.right.diff(wrt)))

    def names(self):
        return self.left.names() | self.right.names()


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr

    def evaluate(self, point, params=None):
        den = self.right.evaluate(point, params)
        try:
            return _finite(self.left.evaluate(point, params) / den, "division")
        except ZeroDivisionError:
            raise NonFiniteError("division by zero") from None

    def diff(self, wrt):
        # quotient rule: (u'v - uv') / v^2
        u, v = self.left, self.right
        num = sub(mul(u.diff(wrt), v), mul(u, v.diff(wrt)))
        return div(num, mul(v, v))

    def names(self):
        return self.left.names() | self.right.names()


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Expr

    def evaluate(self, point, params=None):
        b = self.base.evaluate(point, params)
        e = self.exponent.evaluate(point, params)
        try:
            # math.pow keeps float semantics uniform: negative base with a
            # fractional exponent raises instead of going complex.
            return _finite(math.pow(b, e), "power")
        except (ValueError, OverflowError, ZeroDivisionError):
            raise NonFiniteError(f"invalid power {b!r} ^ {e!r}") from None

    def diff(self, wrt):
        u, p = self.base, self.exponent
        if isinstance(p, Const):
            # c * u^(c-1) * u'
            return mul(mul(p, pow_(u, Const(p.value - 1.0))), u.diff(wrt))
        # general case via u^p = exp(p * ln u):
        # (u^p)' = u^p * (p' * ln u + p * u' / u)
        bracket = add(mul(p.diff(wrt), ln_(u)), div(mul(p, u.diff(wrt)), u))
        return mul(self, bracket)

    def names(self):
        return self.base.names() | self.exponent.names()


_ZERO = Const(0.0)
_ONE = Const(1.0)


# ---------------------------------------------------------------------------
# smart constructors: local constant folding only

def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and a.value == 0.0:
        return b
    if isinstance(b, Const) and b.value == 0.0:
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        v = a.value + b.value
        if math.isfinite(v):
            return Const(v)
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(b, Const) and b.value == 0.0:
        return a
    if isinstance(a, Const) and a.value == 0.0:
        return neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        v = a.value - b.value
        if math.isfinite(v):
            return Const(v)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const):
        if a.value == 0.0:
            return _ZERO
        if a.value == 1.0:
            return b
    if isinstance(b, Const):
        if b.value == 0.0:
            return _ZERO
        if b.value == 1.0:
            return a
    if isinstance(a, Const) and isinstance(b, Const):
        v = a.value * b.value
        if math.isfinite(v):
            return Const(v)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and a.value == 0.0:
        return _ZERO
    if isinstance(b, Const) and b.value == 1.0:
        return a
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        v = a.value / b.value
        if math.isfinite(v):
            return Const(v)
    return Div(a, b)


def pow_(a: Expr, b: Expr) -> Expr:
    if isinstance(b, Const):
        if b.value == 0.0:
            return _ONE
        if b.value == 1.0:
            return a
        if isinstance(a, Const):
            try:
                v = math.pow(a.value, b.value)
            except (ValueError, OverflowError, ZeroDivisionError):
                return Pow(a, b)
            if math.isfinite(v):
                return Const(v)
    return Pow(a, b)


def exp_(a: Expr) -> Expr:
    if isinstance(a, Const):
        try:
            v = math.exp(a.value)
        except OverflowError:
            return Exp(a)
        if math.isfinite(v):
            return Const(v)
    return Exp(a)


def ln_(a: Expr) -> Expr:
    if isinstance(a, Const) and a.value > 0.0:
        return Const(math.log(a.value))
    return Ln(a)


def differentiate(e: Expr, wrt: str) -> Expr:
    """Symbolic partial derivative of ``e`` with respect to the name ``wrt``."""
    return e.diff(wrt)


# ---------------------------------------------------------------------------
# tokenizer / parser

_OPS = set("+-*/^()")
_FUNCTIONS = {"exp", "ln"}


def _tokenize(source: str) -> list[tuple[str, str, int, int]]:
    tokens = []
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        ch = source[i]
        if ch in " \t\r\n":
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1
            continue
        start_line, start_col = line, col
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and source[j].isdigit():
                j += 1
            if j < n and source[j] == ".":
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            tokens.append(("number", text, start_line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(("ident", source[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        if ch in _OPS:
            tokens.append(("op", ch, start_line, start_col))
            col += 1
            i += 1
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", line, col)
    tokens.append(("end", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens, parameters):
        self.tokens = tokens
        self.pos = 0
        self.parameters = parameters

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op):
        kind, text, line, col = self.peek()
        if kind != "op" or text != op:
            raise ExprSyntaxError(f"expected '{op}'", line, col)
        return self.take()

    def at_op(self, *ops):
        kind, text, _, _ = self.peek()
        return kind == "op" and text in ops

    def expr(self) -> Expr:
        left = self.term()
        while self.at_op("+", "-"):
            _, op, _, _ = self.take()
            right = self.term()
            left = Add(left, right) if op == "+" else Sub(left, right)
        return left

    def term(self) -> Expr:
        left = self.factor()
        while self.at_op("*", "/"):
            _, op, _, _ = self.take()
            right = self.factor()
            left = Mul(left, right) if op == "*" else Div(left, right)
        return left

    def factor(self) -> Expr:
        if self.at_op("-"):
            self.take()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.at_op("^"):
            self.take()
            return Pow(base, self.factor())
        return base

    def atom(self) -> Expr:
        kind, text, line, col = self.take()
        if kind == "number":
            return Const(float(text))
        if kind == "ident":
            if self.at_op("("):
                if text not in _FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function '{text}'", line, col)
                self.take()
                arg = self.expr()
                self.expect_op(")")
                return Exp(arg) if text == "exp" else Ln(arg)
            if text in self.parameters:
                return Param(text)
            return Var(text)
        if kind == "op" and text == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise ExprSyntaxError("expected a number, name or '('", line, col)


def parse(source: str, parameters=frozenset()) -> Expr:
    """Parse source text into an expression tree.

    Identifiers in ``parameters`` become Param nodes; every other
    identifier becomes a Var node (whether it names anything is checked
    by the owning model at load time, not here).
    """
    tokens = _tokenize(source)
    parser = _Parser(tokens, frozenset(parameters))
    tree = parser.expr()
    kind, text, line, col = parser.peek()
    if kind != "end":
        raise ExprSyntaxError(f"unexpected trailing input {text!r}", line, col)
    return tree


# ---------------------------------------------------------------------------
# printing

# precedence levels used for minimal parenthesization:
# add/sub 0, mul/div 1, unary minus 2, pow 3, atoms 4
def _prec(e: Expr) -> int:
    if isinstance(e, (Add, Sub)):
        return 0
    if isinstance(e, (Mul, Div)):
        return 1
    if isinstance(e, Neg):
        return 2
    if isinstance(e, Const) and (e.value < 0 or not math.isfinite(e.value)):
        return 2
    if isinstance(e, Pow):
        return 3
    return 4


def _render_const(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _render(e: Expr, min_prec: int) -> str:
    if _prec(e) < min_prec:
        return "(" + _render(e, 0) + ")"
    if isinstance(e, Const):
        return _render_const(e.value)
    if isinstance(e, (Var, Param)):
        return e.name
    if isinstance(e, Neg):
        return "-" + _render(e.arg, 2)
    if isinstance(e, Exp):
        return "exp(" + _render(e.arg, 0) + ")"
    if isinstance(e, Ln):
        return "ln(" + _render(e.arg, 0) + ")"
    if isinstance(e, Add):
        return _render(e.left, 0) + "+" + _render(e.right, 1)
    if isinstance(e, Sub):
        return _render(e.left, 0) + "-" + _render(e.right, 1)
    if isinstance(e, Mul):
        return _render(e.left, 1) + "*" + _render(e.right, 2)
    if isinstance(e, Div):
        return _render(e.left, 1) + "/" + _render(e.right, 2)
    if isinstance(e, Pow):
        return _render(e.base, 4) + "^" + _render(e.exponent, 2)
    raise TypeError(f"not an expression node: {e!r}")


def to_source(e: Expr) -> str:
    """Render a tree back to grammar-conformant source text.

    Reparsing the result evaluates identically to the original tree;
    parenthesization is minimal, so the node structure itself may differ
    in sign placement (e.g. a negative constant reparses as Neg(Const)).
    """
    return _render(e, 0)
