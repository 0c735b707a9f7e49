"""A small arithmetic expression language for defining fields.

Grammar (loosest to tightest binding): '+' '-', '*' '/', unary '-',
'^' (right associative, binds above unary minus so -x^2 == -(x^2)),
function calls and parentheses.  Functions: sin cos tan exp log sqrt
abs arcsin.  Variables are declared at parse time (default x, y, z).

Evaluation comes in two flavours: plain floats, and dual numbers that
carry an exact 3-gradient alongside the value.  Both share the same
domain rules (log of a non-positive value, arcsin outside [-1, 1],
division by zero and fractional powers of negatives are errors).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .fieldcore import Point3, PoissonizeError, ScalarField3, Vec3, VectorField3

import numpy as np


class ExprError(PoissonizeError):
    """Base class for expression language errors."""


class ExprSyntaxError(ExprError):
    """Malformed source text; carries the byte offset and what was expected."""

    def __init__(self, offset: int, expected: str) -> None:
        super().__init__(f"at offset {offset}: expected {expected}")
        self.offset = offset
        self.expected = expected


class UnknownIdentifier(ExprError):
    def __init__(self, name: str, offset: int) -> None:
        super().__init__(f"at offset {offset}: unknown identifier '{name}'")
        self.name = name
        self.offset = offset


class DomainError(ExprError):
    """Evaluation left the mathematical domain of an operation."""


FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "arcsin")
DEFAULT_VARIABLES = ("x", "y", "z")


# ---------------------------------------------------------------------------
# Dual numbers: value plus an exact gradient with respect to the three
# declared variables.

_ZERO3 = (0.0, 0.0, 0.0)


@dataclass(slots=True)
class Dual:
    value: float
    grad: tuple[float, float, float] = _ZERO3

    def __add__(self, o: "Dual") -> "Dual":
        g, h = self.grad, o.grad
        return Dual(self.value + o.value, (g[0] + h[0], g[1] + h[1], g[2] + h[2]))

    def __sub__(self, o: "Dual") -> "Dual":
        g, h = self.grad, o.grad
        return Dual(self.value - o.value, (g[0] - h[0], g[1] - h[1], g[2] - h[2]))

    def __mul__(self, o: "Dual") -> "Dual":
        a, b = self.value, o.value
        g, h = self.grad, o.grad
        return Dual(a * b, (g[0] * b + a * h[0], g[1] * b + a * h[1], g[2] * b + a * h[2]))

    def __truediv__(self, o: "Dual") -> "Dual":
        if o.value == 0.0:
            raise DomainError("division by zero")
        a, b = self.value, o.value
        g, h = self.grad, o.grad
        inv2 = 1.0 / (b * b)
        return Dual(a / b, ((g[0] * b - a * h[0]) * inv2,
                            (g[1] * b - a * h[1]) * inv2,
                            (g[2] * b - a * h[2]) * inv2))

    def __neg__(self) -> "Dual":
        g = self.grad
        return Dual(-self.value, (-g[0], -g[1], -g[2]))

    def chain(self, value: float, slope: float) -> "Dual":
        """Lift a scalar function with derivative `slope` at self.value."""
        g = self.grad
        return Dual(value, (slope * g[0], slope * g[1], slope * g[2]))


def _is_constant(d: Dual) -> bool:
    return d.grad[0] == 0.0 and d.grad[1] == 0.0 and d.grad[2] == 0.0


def _pow_dual(base: Dual, expo: Dual) -> Dual:
    if _is_constant(expo):
        n = expo.value
        b = base.value
        if b < 0.0 and n != round(n):
            raise DomainError(f"negative base {b} with non-integer exponent {n}")
        if b == 0.0:
            if n <= 0.0:
                raise DomainError(f"0 raised to the {n} power")
            if n == 1.0:
                return Dual(0.0, base.grad)
            if n < 1.0:
                raise DomainError(f"derivative of 0^{n} is unbounded")
            return Dual(0.0, _ZERO3)
        return base.chain(b ** n, n * b ** (n - 1.0))
    if base.value <= 0.0:
        raise DomainError(f"variable exponent requires a positive base, got {base.value}")
    v = base.value ** expo.value
    g, h = base.grad, expo.grad
    lnb = math.log(base.value)
    coef_b = expo.value * base.value ** (expo.value - 1.0)
    return Dual(v, (coef_b * g[0] + v * lnb * h[0],
                    coef_b * g[1] + v * lnb * h[1],
                    coef_b * g[2] + v * lnb * h[2]))


def _pow_float(b: float, n: float) -> float:
    if b < 0.0 and n != round(n):
        raise DomainError(f"negative base {b} with non-integer exponent {n}")
    if b == 0.0 and n <= 0.0:
        raise DomainError(f"0 raised to the {n} power")
    return b ** n


def _call_dual(name: str, a: Dual) -> Dual:
    v = a.value
    if name == "sin":
        return a.chain(math.sin(v), math.cos(v))
    if name == "cos":
        return a.chain(math.cos(v), -math.sin(v))
    if name == "tan":
        t = math.tan(v)
        return a.chain(t, 1.0 + t * t)
    if name == "exp":
        e = math.exp(v)
        return a.chain(e, e)
    if name == "log":
        if v <= 0.0:
            raise DomainError(f"log of non-positive value {v}")
        return a.chain(math.log(v), 1.0 / v)
    if name == "sqrt":
        if v < 0.0:
            raise DomainError(f"sqrt of negative value {v}")
        if v == 0.0:
            if _is_constant(a):
                return Dual(0.0, _ZERO3)
            raise DomainError("derivative of sqrt at 0 is unbounded")
        r = math.sqrt(v)
        return a.chain(r, 0.5 / r)
    if name == "abs":
        return a.chain(abs(v), math.copysign(1.0, v) if v != 0.0 else 0.0)
    if name == "arcsin":
        if v < -1.0 or v > 1.0:
            raise DomainError(f"arcsin of {v} outside [-1, 1]")
        if abs(v) == 1.0 and not _is_constant(a):
            raise DomainError("derivative of arcsin at +-1 is unbounded")
        return a.chain(math.asin(v), 1.0 / math.sqrt(1.0 - v * v) if abs(v) < 1.0 else 0.0)
    raise AssertionError(name)


def _call_float(name: str, v: float) -> float:
    if name == "log" and v <= 0.0:
        raise DomainError(f"log of non-positive value {v}")
    if name == "sqrt" and v < 0.0:
        raise DomainError(f"sqrt of negative value {v}")
    if name == "arcsin":
        if v < -1.0 or v > 1.0:
            raise DomainError(f"arcsin of {v} outside [-1, 1]")
        return math.asin(v)
    return {
        "sin": math.sin, "cos": math.cos, "tan": math.tan, "exp": math.exp,
        "log": math.log, "sqrt": math.sqrt, "abs": abs,
    }[name](v)


# ---------------------------------------------------------------------------
# Syntax tree.

@dataclass(slots=True)
class Num:
    value: float


@dataclass(slots=True)
class Var:
    name: str
    slot: int


@dataclass(slots=True)
class Neg:
    arg: object


@dataclass(slots=True)
class Call:
    fn: str
    arg: object


@dataclass(slots=True)
class BinOp:
    op: str
    left: object
    right: object


_TOKEN_RE = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
                       r"|\d+(?:[eE][+-]?\d+)?)|([A-Za-z_][A-Za-z0-9_]*)|([-+*/^()]))")


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            stripped = src[pos:].lstrip()
            if not stripped:
                break
            raise ExprSyntaxError(len(src) - len(stripped), "a number, name or operator")
        off = m.start(m.lastindex)
        if m.group(1) is not None:
            tokens.append(("num", m.group(1), off))
        elif m.group(2) is not None:
            tokens.append(("ident", m.group(2), off))
        else:
            tokens.append(("op", m.group(3), off))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, variables: tuple[str, ...]) -> None:
        self.tokens = _tokenize(src)
        self.pos = 0
        self.variables = variables

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.pos]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str) -> None:
        kind, text, off = self.peek()
        if kind != "op" or text != op:
            raise ExprSyntaxError(off, f"'{op}'")
        self.advance()

    def parse(self) -> object:
        node = self.sum()
        kind, _, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(off, "end of input")
        return node

    def sum(self) -> object:
        node = self.product()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                node = BinOp(text, node, self.product())
            else:
                return node

    def product(self) -> object:
        node = self.unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                node = BinOp(text, node, self.unary())
            else:
                return node

    def unary(self) -> object:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> object:
        node = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            # Right associative, and the exponent may carry a unary minus.
            return BinOp("^", node, self.unary())
        return node

    def atom(self) -> object:
        kind, text, off = self.advance()
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            nk, nt, _ = self.peek()
            if nk == "op" and nt == "(":
                if text not in FUNCTIONS:
                    raise UnknownIdentifier(text, off)
                self.advance()
                arg = self.sum()
                self.expect_op(")")
                return Call(text, arg)
            if text in self.variables:
                return Var(text, self.variables.index(text))
            raise UnknownIdentifier(text, off)
        if kind == "op" and text == "(":
            node = self.sum()
            self.expect_op(")")
            return node
        raise ExprSyntaxError(off, "a value")


def parse(src: str, variables: tuple[str, ...] = DEFAULT_VARIABLES) -> object:
    """Parse source text into a syntax tree over the given variable names."""
    return _Parser(src, variables).parse()


def eval_dual(node: object, p: Point3) -> Dual:
    """Evaluate with the exact gradient seeded on the three variable slots."""
    return _eval_dual(node, (p.x, p.y, p.z))


_SEEDS = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


def _eval_dual(node: object, values: tuple[float, float, float]) -> Dual:
    if isinstance(node, Num):
        return Dual(node.value)
    if isinstance(node, Var):
        return Dual(values[node.slot], _SEEDS[node.slot])
    if isinstance(node, Neg):
        return -_eval_dual(node.arg, values)
    if isinstance(node, Call):
        return _call_dual(node.fn, _eval_dual(node.arg, values))
    if isinstance(node, BinOp):
        left = _eval_dual(node.left, values)
        right = _eval_dual(node.right, values)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if node.op == "/":
            return left / right
        return _pow_dual(left, right)
    raise AssertionError(node)


def eval_values(node: object, values: tuple[float, ...]) -> float:
    """Float-only evaluation against a tuple aligned with the parse variables."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return values[node.slot]
    if isinstance(node, Neg):
        return -eval_values(node.arg, values)
    if isinstance(node, Call):
        return _call_float(node.fn, eval_values(node.arg, values))
    if isinstance(node, BinOp):
        left = eval_values(node.left, values)
        right = eval_values(node.right, values)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if node.op == "/":
            if right == 0.0:
                raise DomainError("division by zero")
            return left / right
        return _pow_float(left, right)
    raise AssertionError(node)


# ---------------------------------------------------------------------------
# Printing.  Parenthesization is minimal; parse(to_source(ast)) rebuilds the
# same tree.

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _prec(node: object) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return _PREC["atom"]


def to_source(node: object) -> str:
    if isinstance(node, Num):
        if node.value.is_integer():
            return repr(int(node.value))
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        inner = to_source(node.arg)
        if _prec(node.arg) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Call):
        return f"{node.fn}({to_source(node.arg)})"
    if isinstance(node, BinOp):
        lp, rp = _prec(node.left), _prec(node.right)
        left, right = to_source(node.left), to_source(node.right)
        if node.op == "^":
            # Right associative: parenthesize the left side when it binds
            # at or below '^' (including unary minus), keep the right bare.
            if lp <= _PREC["^"]:
                left = f"({left})"
            if rp < _PREC["neg"]:
                right = f"({right})"
            return f"{left}^{right}"
        here = _PREC[node.op]
        if lp < here:
            left = f"({left})"
        # '-' and '/' are left associative: the right side needs parens on ties.
        if rp < here or (rp == here and node.op in "-/"):
            right = f"({right})"
        return f"{left}{node.op}{right}"
    raise AssertionError(node)


# ---------------------------------------------------------------------------
# Field adapters.

class ExprScalarField(ScalarField3):
    """Scalar field defined by an expression in three variables."""

    def __init__(self, src: str, variables: tuple[str, ...] = DEFAULT_VARIABLES) -> None:
        self.source = src
        self.variables = variables
        self.ast = parse(src, variables)
        self.name = src

    def eval(self, p: Point3) -> float:
        return eval_values(self.ast, (p.x, p.y, p.z))

    def gradient(self, p: Point3) -> Vec3:
        return Vec3(*eval_dual(self.ast, p).grad)


class ExprVectorField(VectorField3):
    """Vector field from three component expressions."""

    def __init__(self, sources: tuple[str, str, str],
                 variables: tuple[str, ...] = DEFAULT_VARIABLES) -> None:
        self.sources = tuple(sources)
        self.variables = variables
        self.asts = tuple(parse(s, variables) for s in sources)
        self.name = "(" + ", ".join(sources) + ")"

    def eval(self, p: Point3) -> Vec3:
        v = (p.x, p.y, p.z)
        return Vec3(*(eval_values(a, v) for a in self.asts))

    def jacobian(self, p: Point3) -> np.ndarray:
        rows = [eval_dual(a, p).grad for a in self.asts]
        return np.array(rows)
