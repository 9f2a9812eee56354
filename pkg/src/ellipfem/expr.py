"""Scalar expressions in ``x`` and ``y``: parsing, evaluation, differentiation.

Expressions are small immutable trees. Evaluation accepts plain floats or
numpy arrays of matching shape, so the same tree can be sampled at a single
point or at every quadrature point of a mesh in one call.

Grammar (lowest to highest binding)::

    sum     := product (('+' | '-') product)*
    product := power (('*' | '/') power)*
    power   := unary ('^' power)?          # right-associative
    unary   := ('-' | '+') unary | call
    call    := NAME '(' sum ')' | atom
    atom    := NUMBER | 'x' | 'y' | 'pi' | '(' sum ')'

Unary minus is parsed before ``^`` claims its base, so ``-x^2`` reads as
``(-x)^2``; write ``-(x^2)`` for the other reading.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "DomainError",
    "NotDifferentiableError",
    "Constant",
    "VariableX",
    "VariableY",
    "Unary",
    "Binary",
    "ExprAst",
    "parse",
    "evaluate",
    "differentiate",
    "to_text",
    "is_constant",
    "make_neg",
    "make_add",
    "make_sub",
    "make_mul",
    "make_div",
    "make_pow",
]

UNARY_OPS = ("neg", "sin", "cos", "exp", "sqrt", "log", "abs")
BINARY_OPS = ("add", "sub", "mul", "div", "pow")
FUNCTIONS = ("sin", "cos", "exp", "sqrt", "log", "abs")


class ExprError(ValueError):
    """Base class for every expression failure."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier {name!r} at position {position}")
        self.name = name
        self.position = position


class DomainError(ExprError, ArithmeticError):
    pass


class NotDifferentiableError(ExprError):
    pass


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class VariableX:
    pass


@dataclass(frozen=True)
class VariableY:
    pass


@dataclass(frozen=True)
class Unary:
    op: str
    child: "ExprAst"

    def __post_init__(self):
        if self.op not in UNARY_OPS:
            raise ValueError(f"unknown unary op {self.op!r}")


@dataclass(frozen=True)
class Binary:
    op: str
    left: "ExprAst"
    right: "ExprAst"

    def __post_init__(self):
        if self.op not in BINARY_OPS:
            raise ValueError(f"unknown binary op {self.op!r}")


ExprAst = Union[Constant, VariableX, VariableY, Unary, Binary]

X = VariableX()
Y = VariableY()
ZERO = Constant(0.0)
ONE = Constant(1.0)


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, value, pos = self.take()
        if value != text or kind == "end":
            found = "end of input" if kind == "end" else repr(value)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", pos)

    def parse(self) -> ExprAst:
        if self.peek()[0] == "end":
            raise ExprSyntaxError("empty expression", 0)
        node = self.sum()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {value!r}", pos)
        return node

    def sum(self) -> ExprAst:
        node = self.product()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = "add" if self.take()[1] == "+" else "sub"
            node = Binary(op, node, self.product())
        return node

    def product(self) -> ExprAst:
        node = self.power()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = "mul" if self.take()[1] == "*" else "div"
            node = Binary(op, node, self.power())
        return node

    def power(self) -> ExprAst:
        base = self.unary()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            return Binary("pow", base, self.power())
        return base

    def unary(self) -> ExprAst:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.take()
            return Unary("neg", self.unary())
        if kind == "op" and value == "+":
            self.take()
            return self.unary()
        return self.call()

    def call(self) -> ExprAst:
        kind, value, pos = self.take()
        if kind == "num":
            return Constant(float(value))
        if kind == "name":
            if value == "x":
                return X
            if value == "y":
                return Y
            if value == "pi":
                return Constant(math.pi)
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.sum()
                self.expect(")")
                return Unary(value, arg)
            raise UnknownIdentifierError(value, pos)
        if kind == "op" and value == "(":
            node = self.sum()
            self.expect(")")
            return node
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", pos)
        raise ExprSyntaxError(f"unexpected {value!r}", pos)


def parse(source: str) -> ExprAst:
    """Parse expression text into a tree.

    Raises
    ------
    ExprSyntaxError
        Malformed input; carries the character offset.
    UnknownIdentifierError
        Any name outside x, y, pi and the supported functions.
    """
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# evaluation


def _checked(value, what: str):
    if not np.all(np.isfinite(value)):
        raise DomainError(f"{what} produced a non-finite value")
    return value


def _eval(node, x, y):
    if isinstance(node, Constant):
        return node.value
    if isinstance(node, VariableX):
        return x
    if isinstance(node, VariableY):
        return y
    if isinstance(node, Unary):
        a = _eval(node.child, x, y)
        op = node.op
        if op == "neg":
            return -a
        if op == "sqrt":
            if np.any(np.asarray(a) < 0):
                raise DomainError("sqrt of a negative value")
            return np.sqrt(a)
        if op == "log":
            if np.any(np.asarray(a) <= 0):
                raise DomainError("log of a non-positive value")
            return np.log(a)
        if op == "abs":
            return np.abs(a)
        fn = {"sin": np.sin, "cos": np.cos, "exp": np.exp}[op]
        return _checked(fn(a), op)
    a = _eval(node.left, x, y)
    b = _eval(node.right, x, y)
    op = node.op
    if op == "add":
        return _checked(a + b, "addition")
    if op == "sub":
        return _checked(a - b, "subtraction")
    if op == "mul":
        return _checked(a * b, "multiplication")
    if op == "div":
        if np.any(np.asarray(b) == 0):
            raise DomainError("division by zero")
        return _checked(a / b, "division")
    base = np.asarray(a, dtype=float)
    expo = np.asarray(b, dtype=float)
    if np.any((base == 0) & (expo < 0)):
        raise DomainError("zero raised to a negative power")
    if np.any((base < 0) & (expo != np.round(expo))):
        raise DomainError("negative base raised to a non-integer power")
    return _checked(np.power(base, expo), "power")


def evaluate(ast: ExprAst, x, y):
    """Evaluate ``ast`` at ``(x, y)``.

    Scalars in give a float back; arrays broadcast elementwise. Any
    division by zero, log/sqrt outside its domain, or overflow raises
    :class:`DomainError` instead of leaking nan/inf.
    """
    with np.errstate(all="ignore"):
        out = _eval(ast, x, y)
    if np.ndim(out) == 0 and np.ndim(x) == 0 and np.ndim(y) == 0:
        return float(out)
    return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(x, y).shape).copy()


# ---------------------------------------------------------------------------
# differentiation with light folding


def is_constant(node: ExprAst) -> bool:
    return isinstance(node, Constant)


def _const_value(node):
    return node.value if isinstance(node, Constant) else None


def make_neg(a):
    c = _const_value(a)
    if c is not None:
        return Constant(-c)
    if isinstance(a, Unary) and a.op == "neg":
        return a.child
    return Unary("neg", a)


def make_add(a, b):
    ca, cb = _const_value(a), _const_value(b)
    if ca is not None and cb is not None:
        return Constant(ca + cb)
    if ca == 0:
        return b
    if cb == 0:
        return a
    return Binary("add", a, b)


def make_sub(a, b):
    ca, cb = _const_value(a), _const_value(b)
    if ca is not None and cb is not None:
        return Constant(ca - cb)
    if cb == 0:
        return a
    if ca == 0:
        return make_neg(b)
    return Binary("sub", a, b)


def make_mul(a, b):
    ca, cb = _const_value(a), _const_value(b)
    if ca is not None and cb is not None:
        return Constant(ca * cb)
    if ca == 0 or cb == 0:
        return ZERO
    if ca == 1:
        return b
    if cb == 1:
        return a
    return Binary("mul", a, b)


def make_div(a, b):
    ca, cb = _const_value(a), _const_value(b)
    if ca is not None and cb is not None and cb != 0:
        return Constant(ca / cb)
    if ca == 0:
        return ZERO
    if cb == 1:
        return a
    return Binary("div", a, b)


def make_pow(a, b):
    ca, cb = _const_value(a), _const_value(b)
    if cb == 1:
        return a
    if cb == 0:
        return ONE
    if ca is not None and cb is not None:
        try:
            return Constant(float(evaluate(Binary("pow", a, b), 0.0, 0.0)))
        except DomainError:
            pass
    return Binary("pow", a, b)


def differentiate(ast: ExprAst, var: str) -> ExprAst:
    """Partial derivative of ``ast`` with respect to ``var`` ('x' or 'y').

    The result is only constant-folded, not simplified further; compare
    derivatives by evaluation. ``abs`` is rejected.
    """
    if var not in ("x", "y"):
        raise ValueError(f"can only differentiate in x or y, got {var!r}")
    return _diff(ast, var)


def _diff(node, var):
    if isinstance(node, Constant):
        return ZERO
    if isinstance(node, VariableX):
        return ONE if var == "x" else ZERO
    if isinstance(node, VariableY):
        return ONE if var == "y" else ZERO
    if isinstance(node, Unary):
        u = node.child
        du = _diff(u, var)
        op = node.op
        if op == "abs":
            raise NotDifferentiableError("abs() is not differentiable")
        if op == "neg":
            return make_neg(du)
        if op == "sin":
            outer = Unary("cos", u)
        elif op == "cos":
            outer = make_neg(Unary("sin", u))
        elif op == "exp":
            outer = node
        elif op == "sqrt":
            outer = make_div(ONE, make_mul(Constant(2.0), node))
        else:  # log
            outer = make_div(ONE, u)
        return make_mul(outer, du)
    u, v = node.left, node.right
    du, dv = _diff(u, var), _diff(v, var)
    op = node.op
    if op == "add":
        return make_add(du, dv)
    if op == "sub":
        return make_sub(du, dv)
    if op == "mul":
        return make_add(make_mul(du, v), make_mul(u, dv))
    if op == "div":
        return make_div(make_sub(make_mul(du, v), make_mul(u, dv)), make_mul(v, v))
    # pow
    if is_constant(v) or dv == ZERO:
        return make_mul(make_mul(v, make_pow(u, make_sub(v, ONE))), du)
    # u^v * (v' log u + v u'/u)
    return make_mul(node, make_add(make_mul(dv, Unary("log", u)), make_div(make_mul(v, du), u)))


# ---------------------------------------------------------------------------
# printing

_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}


def _fmt_const(value: float) -> str:
    if value == math.pi:
        return "pi"
    text = repr(float(value))
    if text in ("inf", "-inf", "nan"):
        raise ExprError(f"cannot print non-finite constant {text}")
    return text if value >= 0 else f"({text})"


def to_text(ast: ExprAst) -> str:
    """Render ``ast`` as text that :func:`parse` reads back to the same value."""
    if isinstance(ast, Constant):
        return _fmt_const(ast.value)
    if isinstance(ast, VariableX):
        return "x"
    if isinstance(ast, VariableY):
        return "y"
    if isinstance(ast, Unary):
        inner = to_text(ast.child)
        if ast.op == "neg":
            return f"(-({inner}))"
        return f"{ast.op}({inner})"
    left = to_text(ast.left)
    right = to_text(ast.right)
    # parenthesize any compound operand; cheap and unambiguous
    if isinstance(ast.left, Binary):
        left = f"({left})"
    if isinstance(ast.right, Binary):
        right = f"({right})"
    return f"{left} {_SYMBOL[ast.op]} {right}"
