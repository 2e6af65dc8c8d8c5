"""Scalar expression language for coframe coefficients and conformal factors.

Grammar (infix, whitespace-insensitive):

    expr    := term  (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := '-' factor | power
    power   := atom ['^' factor]            # right-associative, binds above unary minus
    atom    := NUMBER | 'u'<k> | FUNC '(' expr ')' | '(' expr ')'

Variables are u1..um (1-based), functions sin, cos, exp, log, sqrt, tanh.
Evaluation never returns NaN/Inf silently: leaving the real domain raises
EvalDomainError.  First derivatives are exact (dual-number forward mode).
"""

import math
import re

import numpy as np

from .errors import (DimensionExceeded, EvalDomainError, ExprSyntaxError,
                     UnknownIdentifier)

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh")


class Dual:
    """Value together with its vector of partial derivatives."""

    __slots__ = ("value", "partials")

    def __init__(self, value, partials):
        self.value = value
        self.partials = partials

    def __add__(self, other):
        return Dual(self.value + other.value, self.partials + other.partials)

    def __sub__(self, other):
        return Dual(self.value - other.value, self.partials - other.partials)

    def __mul__(self, other):
        return Dual(self.value * other.value,
                    self.value * other.partials + other.value * self.partials)

    def __truediv__(self, other):
        if other.value == 0.0:
            raise EvalDomainError("division by zero")
        inv = 1.0 / other.value
        return Dual(self.value * inv,
                    (self.partials - self.value * inv * other.partials) * inv)

    def __neg__(self):
        return Dual(-self.value, -self.partials)


# --- AST nodes -------------------------------------------------------------

class Expr:
    """Base node.  Nodes are immutable; evaluation is stateless."""

    def eval(self, point):
        raise NotImplementedError

    def eval_dual(self, duals):
        raise NotImplementedError

    def to_string(self):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.to_string()!r})"


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = float(value)

    def eval(self, point):
        return self.value

    def eval_dual(self, duals):
        return Dual(self.value, np.zeros_like(duals[0].partials))

    def to_string(self):
        return repr(self.value)


class Var(Expr):
    __slots__ = ("index",)

    def __init__(self, index):
        self.index = index  # 0-based

    def eval(self, point):
        return point[self.index]

    def eval_dual(self, duals):
        return duals[self.index]

    def to_string(self):
        return f"u{self.index + 1}"


class Neg(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg):
        self.arg = arg

    def eval(self, point):
        return -self.arg.eval(point)

    def eval_dual(self, duals):
        return -self.arg.eval_dual(duals)

    def to_string(self):
        return f"(-{self.arg.to_string()})"


class BinOp(Expr):
    __slots__ = ("left", "right")
    symbol = "?"

    def __init__(self, left, right):
        self.left = left
        self.right = right

    def to_string(self):
        return f"({self.left.to_string()}{self.symbol}{self.right.to_string()})"


class Add(BinOp):
    symbol = "+"

    def eval(self, point):
        return self.left.eval(point) + self.right.eval(point)

    def eval_dual(self, duals):
        return self.left.eval_dual(duals) + self.right.eval_dual(duals)


class Sub(BinOp):
    symbol = "-"

    def eval(self, point):
        return self.left.eval(point) - self.right.eval(point)

    def eval_dual(self, duals):
        return self.left.eval_dual(duals) - self.right.eval_dual(duals)


class Mul(BinOp):
    symbol = "*"

    def eval(self, point):
        return self.left.eval(point) * self.right.eval(point)

    def eval_dual(self, duals):
        return self.left.eval_dual(duals) * self.right.eval_dual(duals)


class Div(BinOp):
    symbol = "/"

    def eval(self, point):
        den = self.right.eval(point)
        if den == 0.0:
            raise EvalDomainError("division by zero")
        return self.left.eval(point) / den

    def eval_dual(self, duals):
        return self.left.eval_dual(duals) / self.right.eval_dual(duals)


def _int_pow(base, k):
    # repeated multiplication; negative exponents through the reciprocal
    if k < 0:
        if base == 0.0:
            raise EvalDomainError("zero raised to a negative power")
        return 1.0 / _int_pow(base, -k)
    out = 1.0
    for _ in range(k):
        out = out * base
    return out


def _int_pow_dual(base, k):
    if k < 0:
        if base.value == 0.0:
            raise EvalDomainError("zero raised to a negative power")
        one = Dual(1.0, np.zeros_like(base.partials))
        return one / _int_pow_dual(base, -k)
    out = Dual(1.0, np.zeros_like(base.partials))
    for _ in range(k):
        out = out * base
    return out


class Pow(BinOp):
    """Integer exponents by repeated multiplication; real exponents through
    exp(b log a), which requires a positive base."""

    symbol = "^"

    def eval(self, point):
        b = self.left.eval(point)
        e = self.right.eval(point)
        if float(e).is_integer():
            return _int_pow(b, int(e))
        if b <= 0.0:
            raise EvalDomainError("non-integer power of a non-positive base")
        return math.exp(e * math.log(b))

    def eval_dual(self, duals):
        b = self.left.eval_dual(duals)
        e = self.right.eval_dual(duals)
        if float(e.value).is_integer() and not e.partials.any():
            return _int_pow_dual(b, int(e.value))
        if b.value <= 0.0:
            raise EvalDomainError("non-integer power of a non-positive base")
        # a^e = exp(e log a)
        log_b = Dual(math.log(b.value), b.partials / b.value)
        prod = e * log_b
        val = math.exp(prod.value)
        return Dual(val, val * prod.partials)


_FUNC_IMPL = {
    "sin": (math.sin, math.cos),
    "cos": (math.cos, lambda v: -math.sin(v)),
    "exp": (math.exp, math.exp),
    "tanh": (math.tanh, lambda v: 1.0 - math.tanh(v) ** 2),
}


class Call(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name, arg):
        self.name = name
        self.arg = arg

    def eval(self, point):
        v = self.arg.eval(point)
        if self.name == "log":
            if v <= 0.0:
                raise EvalDomainError("log of a non-positive value")
            return math.log(v)
        if self.name == "sqrt":
            if v < 0.0:
                raise EvalDomainError("sqrt of a negative value")
            return math.sqrt(v)
        fn, _ = _FUNC_IMPL[self.name]
        return fn(v)

    def eval_dual(self, duals):
        a = self.arg.eval_dual(duals)
        v = a.value
        if self.name == "log":
            if v <= 0.0:
                raise EvalDomainError("log of a non-positive value")
            return Dual(math.log(v), a.partials / v)
        if self.name == "sqrt":
            if v < 0.0:
                raise EvalDomainError("sqrt of a negative value")
            if v == 0.0:
                raise EvalDomainError("sqrt not differentiable at zero")
            r = math.sqrt(v)
            return Dual(r, a.partials * (0.5 / r))
        fn, dfn = _FUNC_IMPL[self.name]
        return Dual(fn(v), dfn(v) * a.partials)

    def to_string(self):
        return f"{self.name}({self.arg.to_string()})"


# --- parser ----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))")


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        mo = _TOKEN_RE.match(text, pos)
        if mo is None or mo.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ExprSyntaxError(
                f"unexpected character {stripped[0]!r}",
                len(text) - len(stripped))
        kind = mo.lastgroup
        tokens.append((kind, mo.group(kind), mo.start(kind)))
        pos = mo.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, m):
        self.text = text
        self.m = m
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op):
        kind, value, offset = self.peek()
        if kind != "op" or value != op:
            raise ExprSyntaxError(f"expected {op!r}", offset)
        self.advance()

    def parse(self):
        e = self.expr()
        kind, value, offset = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {value!r}", offset)
        return e

    def expr(self):
        node = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                rhs = self.term()
                node = Add(node, rhs) if value == "+" else Sub(node, rhs)
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.advance()
                rhs = self.factor()
                node = Mul(node, rhs) if value == "*" else Div(node, rhs)
            else:
                return node

    def factor(self):
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self):
        base = self.atom()
        kind, value, _ = self.peek()
        if kind == "op" and value == "^":
            self.advance()
            # right-associative; exponent may carry a unary minus
            return Pow(base, self.factor())
        return base

    def atom(self):
        kind, value, offset = self.advance()
        if kind == "num":
            return Const(float(value))
        if kind == "ident":
            if value in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(value, arg)
            mo = re.fullmatch(r"u([1-9]\d*)", value)
            if mo:
                index = int(mo.group(1))
                if index > self.m:
                    raise DimensionExceeded(value, self.m, offset)
                return Var(index - 1)
            raise UnknownIdentifier(value, offset)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExprSyntaxError(f"unexpected {value!r}" if value else "unexpected end of input",
                              offset)


def parse(text, m):
    """Parse an expression over variables u1..um."""
    return _Parser(text, m).parse()


def evaluate(expr, point):
    """Evaluate at a point (length-m sequence); raises EvalDomainError rather
    than returning NaN/Inf."""
    value = expr.eval(np.asarray(point, dtype=float))
    if not math.isfinite(value):
        raise EvalDomainError("evaluation produced a non-finite value")
    return float(value)


def make_duals(point):
    """Seed duals for one evaluation point, shared across expressions."""
    point = np.asarray(point, dtype=float)
    eye = np.eye(len(point))
    return [Dual(point[i], eye[i]) for i in range(len(point))]


def grad(expr, point):
    """Exact forward-mode gradient at a point: returns an m-vector."""
    out = expr.eval_dual(make_duals(point))
    if not (math.isfinite(out.value) and np.isfinite(out.partials).all()):
        raise EvalDomainError("gradient evaluation produced a non-finite value")
    return out.partials.copy()


def value_and_grad(expr, point):
    out = expr.eval_dual(make_duals(point))
    if not (math.isfinite(out.value) and np.isfinite(out.partials).all()):
        raise EvalDomainError("evaluation produced a non-finite value")
    return float(out.value), out.partials.copy()


def to_string(expr):
    return expr.to_string()
