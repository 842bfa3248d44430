"""Expression language for metric components.

Grammar (whitespace insensitive)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | '+' unary | power
    power   := atom ('^' unary)?          # right associative, -x^2 == -(x^2)
    atom    := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Names resolve to coordinates (``x0 x1 x2`` plus any chart aliases), declared
parameters, or the constants ``pi`` and ``e``.  Functions: sin, cos, exp, log,
sqrt, sinh, cosh, tanh.

ASTs are immutable; evaluation is numpy-vectorised so one call can evaluate an
expression on a whole batch of points.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

UNARY_OPS = ("neg", "sin", "cos", "exp", "log", "sqrt", "sinh", "cosh", "tanh")
BINARY_OPS = ("add", "sub", "mul", "div", "pow")
FUNCTIONS = tuple(op for op in UNARY_OPS if op != "neg")
CONSTANTS = {"pi": math.pi, "e": math.e}
COORDS = ("x0", "x1", "x2")


class ExpressionError(ValueError):
    """Raised on malformed expressions; carries the offending position."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class EvaluationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Const:
    value: float

    def __str__(self) -> str:
        text = repr(float(self.value)) if self.value != int(self.value) else str(int(self.value))
        # parenthesized so that printing then parsing keeps (-c)^n intact
        return f"({text})" if self.value < 0 else text


@dataclass(frozen=True)
class Var:
    """A coordinate (``x0``..``x2``) or a named parameter."""

    name: str

    @property
    def axis(self) -> int | None:
        return COORDS.index(self.name) if self.name in COORDS else None

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Unary:
    op: str
    arg: "Expr"

    def __str__(self) -> str:
        if self.op == "neg":
            return f"(-{self.arg})"
        return f"{self.op}({self.arg})"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"

    def __str__(self) -> str:
        sym = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}[self.op]
        return f"({self.left} {sym} {self.right})"


Expr = Union[Const, Var, Unary, Binary]

ZERO = Const(0.0)
ONE = Const(1.0)


# -- smart constructors: constant folding and 0/1 identities only ----------

def _is(node: Expr, value: float) -> bool:
    return isinstance(node, Const) and node.value == value


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    return Binary("add", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    if a == b:
        return ZERO
    return Binary("sub", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if _is(a, -1):
        return neg(b)
    if _is(b, -1):
        return neg(a)
    return Binary("mul", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is(b, 0):
        raise ExpressionError("division by literal zero")
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value / b.value)
    if _is(a, 0):
        return ZERO
    if _is(b, 1):
        return a
    return Binary("div", a, b)


def power(a: Expr, b: Expr) -> Expr:
    if _is(b, 0):
        return ONE
    if _is(b, 1):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        if a.value < 0 and b.value != int(b.value):
            raise ExpressionError("non-integer power of a negative constant")
        return Const(a.value ** b.value)
    return Binary("pow", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def func(op: str, a: Expr) -> Expr:
    if op == "neg":
        return neg(a)
    if isinstance(a, Const):
        return Const(float(_UNARY_IMPL[op](np.float64(a.value))))
    return Unary(op, a)


# -- parser ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None:
            bad = pos + len(source[pos:]) - len(source[pos:].lstrip())
            raise ExpressionError(f"unexpected character {source[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, names: Mapping[str, Expr]):
        self.tokens = _tokenize(source)
        self.i = 0
        self.names = names

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> None:
        kind, value, pos = self.take()
        if value != text or kind == "end":
            found = "end of input" if kind == "end" else repr(value)
            raise ExpressionError(f"expected {text!r}, found {found}", pos)

    def parse(self) -> Expr:
        node = self.expr()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected token {value!r}", pos)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = add(node, rhs) if op == "+" else sub(node, rhs)
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            node = mul(node, rhs) if op == "*" else div(node, rhs)
        return node

    def unary(self) -> Expr:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.take()
            return neg(self.unary())
        if kind == "op" and value == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            return power(base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, value, pos = self.take()
        if kind == "num":
            return Const(float(value))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if value not in FUNCTIONS:
                    raise ExpressionError(f"unknown function {value!r}", pos)
                self.take()
                arg = self.expr()
                if self.peek()[1] == ",":
                    raise ExpressionError(f"{value} takes exactly one argument", self.peek()[2])
                self.expect(")")
                return func(value, arg)
            if value in FUNCTIONS:
                raise ExpressionError(f"function {value!r} used without an argument", pos)
            if value in self.names:
                return self.names[value]
            raise ExpressionError(f"unknown identifier {value!r}", pos)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(value)
        raise ExpressionError(f"unexpected {found}", pos)


def parse_expression(
    source: str,
    parameters: Sequence[str] = (),
    aliases: Sequence[str] | None = None,
) -> Expr:
    """Parse ``source`` into an AST.

    ``aliases`` optionally renames the three coordinates (e.g. ``("t", "theta",
    "phi")``); ``x0 x1 x2`` stay valid regardless.  Parameters stay symbolic
    and are bound at evaluation time.
    """
    names: dict[str, Expr] = {k: Const(v) for k, v in CONSTANTS.items()}
    for p in parameters:
        if p in COORDS:
            raise ExpressionError(f"parameter name {p!r} shadows a coordinate")
        names[p] = Var(p)
    for axis, name in enumerate(COORDS):
        names[name] = Var(name)
    if aliases is not None:
        if len(aliases) != 3:
            raise ExpressionError("exactly three coordinate aliases required")
        for axis, name in enumerate(aliases):
            names[name] = Var(COORDS[axis])
    return _Parser(source, names).parse()


# -- differentiation -------------------------------------------------------

def differentiate(node: Expr, wrt: int | str) -> Expr:
    """Exact partial derivative with respect to a coordinate axis or parameter."""
    name = COORDS[wrt] if isinstance(wrt, int) else wrt
    return _diff(node, name)


def _diff(node: Expr, name: str) -> Expr:
    if isinstance(node, Const):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.name == name else ZERO
    if isinstance(node, Unary):
        u = node.arg
        du = _diff(u, name)
        if _is(du, 0):
            return ZERO
        op = node.op
        if op == "neg":
            return neg(du)
        if op == "sin":
            outer = func("cos", u)
        elif op == "cos":
            outer = neg(func("sin", u))
        elif op == "exp":
            outer = node
        elif op == "log":
            return div(du, u)
        elif op == "sqrt":
            return div(du, mul(Const(2.0), node))
        elif op == "sinh":
            outer = func("cosh", u)
        elif op == "cosh":
            outer = func("sinh", u)
        elif op == "tanh":
            outer = sub(ONE, power(node, Const(2.0)))
        else:  # pragma: no cover - guarded by construction
            raise ExpressionError(f"unknown unary op {op}")
        return mul(outer, du)

    a, b = node.left, node.right
    da, db = _diff(a, name), _diff(b, name)
    op = node.op
    if op == "add":
        return add(da, db)
    if op == "sub":
        return sub(da, db)
    if op == "mul":
        return add(mul(da, b), mul(a, db))
    if op == "div":
        if _is(db, 0):
            return div(da, b)
        return div(sub(mul(da, b), mul(a, db)), power(b, Const(2.0)))
    # pow
    if isinstance(b, Const) or _is(db, 0):
        if _is(da, 0):
            return ZERO
        return mul(mul(b, power(a, sub(b, ONE))), da)
    # general case: a^b * (b' log a + b a'/a)
    return mul(node, add(mul(db, func("log", a)), div(mul(b, da), a)))


# -- evaluation ------------------------------------------------------------

_UNARY_IMPL = {
    "neg": np.negative,
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
}


def evaluate(node: Expr, point, params: Mapping[str, float] | None = None):
    """Evaluate at ``point`` (shape ``(3,)`` or ``(..., 3)``).

    Returns a float for a single point, otherwise an array of the batch shape.
    """
    pts = np.asarray(point, dtype=float)
    if pts.shape[-1] != 3:
        raise ValueError("points must have a trailing axis of length 3")
    coords = [pts[..., k] for k in range(3)]
    with np.errstate(all="ignore"):
        out = _eval(node, coords, params or {})
    out = np.broadcast_to(np.asarray(out, dtype=float), pts.shape[:-1])
    if not np.all(np.isfinite(out)):
        raise EvaluationError(f"non-finite value while evaluating {node}")
    return float(out) if out.ndim == 0 else np.array(out)


def _eval(node: Expr, coords, params):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        axis = node.axis
        if axis is not None:
            return coords[axis]
        try:
            return params[node.name]
        except KeyError:
            raise EvaluationError(f"unbound parameter {node.name!r}") from None
    if isinstance(node, Unary):
        arg = _eval(node.arg, coords, params)
        if node.op == "log" and np.any(np.asarray(arg) <= 0):
            raise EvaluationError("log of a non-positive value")
        if node.op == "sqrt" and np.any(np.asarray(arg) < 0):
            raise EvaluationError("sqrt of a negative value")
        return _UNARY_IMPL[node.op](arg)
    a = _eval(node.left, coords, params)
    b = _eval(node.right, coords, params)
    op = node.op
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        if np.any(np.asarray(b) == 0):
            raise EvaluationError("division by zero")
        return a / b
    if isinstance(node.right, Const) and float(node.right.value).is_integer():
        n = int(node.right.value)
        if n < 0 and np.any(np.asarray(a) == 0):
            raise EvaluationError("negative power of zero")
        return np.power(a, float(n))
    if np.any(np.asarray(a) <= 0):
        raise EvaluationError("non-integer power requires a positive base")
    return np.power(a, b)


def free_parameters(node: Expr) -> set[str]:
    if isinstance(node, Var):
        return set() if node.axis is not None else {node.name}
    if isinstance(node, Const):
        return set()
    if isinstance(node, Unary):
        return free_parameters(node.arg)
    return free_parameters(node.left) | free_parameters(node.right)


def node_count(node: Expr) -> int:
    if isinstance(node, (Const, Var)):
        return 1
    if isinstance(node, Unary):
        return 1 + node_count(node.arg)
    return 1 + node_count(node.left) + node_count(node.right)
