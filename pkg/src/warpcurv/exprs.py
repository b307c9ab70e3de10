"""Scalar expression trees with exact forward-mode differentiation.

Warping functions, fiber metric entries and torsion-field components are
all small closed-form expressions in the chart coordinates.  They are kept
as explicit trees (node kinds: constant, variable, sum, product, power with
a real exponent, exp, sin, cos, sqrt, reciprocal) and evaluated either on
plain floats or on `Jet` numbers, which propagate the value together with
the exact gradient and Hessian with respect to a chosen coordinate list.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ExprError, ExprParseError


class Jet:
    """Truncated second-order number: value, gradient and optional Hessian.

    Arithmetic follows the usual forward-mode rules; when `hess` is None the
    second-order part is skipped, giving a cheap first-order dual number.
    """

    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad, hess=None):
        self.val = float(val)
        self.grad = np.asarray(grad, dtype=float)
        self.hess = None if hess is None else np.asarray(hess, dtype=float)

    @staticmethod
    def seed(values, index, order=2):
        n = len(values)
        g = np.zeros(n)
        g[index] = 1.0
        h = np.zeros((n, n)) if order == 2 else None
        return Jet(values[index], g, h)

    @staticmethod
    def constant(value, n, order=2):
        h = np.zeros((n, n)) if order == 2 else None
        return Jet(value, np.zeros(n), h)

    def _lift(self, other):
        if isinstance(other, Jet):
            return other
        n = self.grad.shape[0]
        return Jet(other, np.zeros(n), None if self.hess is None else np.zeros((n, n)))

    def __add__(self, other):
        o = self._lift(other)
        h = None
        if self.hess is not None or o.hess is not None:
            h = _zh(self) + _zh(o)
        return Jet(self.val + o.val, self.grad + o.grad, h)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, -self.grad, None if self.hess is None else -self.hess)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._lift(other)
        h = None
        if self.hess is not None or o.hess is not None:
            cross = np.outer(self.grad, o.grad)
            h = self.val * _zh(o) + o.val * _zh(self) + cross + cross.T
        return Jet(self.val * o.val, self.val * o.grad + o.val * self.grad, h)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        return self * o.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def _chain(self, f, fp, fpp):
        h = None
        if self.hess is not None:
            h = fp * self.hess + fpp * np.outer(self.grad, self.grad)
        return Jet(f, fp * self.grad, h)

    def pow_const(self, r):
        r = float(r)
        if r == 0.0:
            n = self.grad.shape[0]
            return Jet(1.0, np.zeros(n), None if self.hess is None else np.zeros((n, n)))
        if self.val <= 0.0 and r != round(r):
            raise ExprError(f"fractional power of non-positive base {self.val!r}")
        if self.val == 0.0 and r < 0:
            raise ExprError("negative power of zero")
        f = self.val ** r
        fp = r * self.val ** (r - 1.0)
        fpp = r * (r - 1.0) * self.val ** (r - 2.0) if self.val != 0.0 else 0.0
        return self._chain(f, fp, fpp)

    def exp(self):
        e = math.exp(self.val)
        return self._chain(e, e, e)

    def sin(self):
        s, c = math.sin(self.val), math.cos(self.val)
        return self._chain(s, c, -s)

    def cos(self):
        s, c = math.sin(self.val), math.cos(self.val)
        return self._chain(c, -s, -c)

    def sqrt(self):
        if self.val <= 0.0:
            raise ExprError(f"sqrt of non-positive value {self.val!r}")
        s = math.sqrt(self.val)
        return self._chain(s, 0.5 / s, -0.25 / (s * self.val))

    def reciprocal(self):
        if self.val == 0.0:
            raise ExprError("reciprocal of zero")
        v = 1.0 / self.val
        return self._chain(v, -v * v, 2.0 * v * v * v)

    def __repr__(self):
        return f"Jet({self.val!r}, grad={self.grad!r})"


def _zh(j):
    n = j.grad.shape[0]
    return j.hess if j.hess is not None else np.zeros((n, n))


# ---------------------------------------------------------------------------
# Expression tree


class ScalarExpr:
    """Base node; subclasses implement eval() and variables()."""

    def eval(self, env):
        raise NotImplementedError

    def variables(self):
        out = set()
        self._collect(out)
        return out

    def _collect(self, out):
        pass

    def _coerce(self, other):
        if isinstance(other, ScalarExpr):
            return other
        if isinstance(other, (int, float)):
            return Const(other)
        raise ExprError(f"cannot build expression from {other!r}")

    def __add__(self, other):
        return Sum(self, self._coerce(other))

    def __radd__(self, other):
        return Sum(self._coerce(other), self)

    def __sub__(self, other):
        return Sum(self, Prod(Const(-1.0), self._coerce(other)))

    def __rsub__(self, other):
        return Sum(self._coerce(other), Prod(Const(-1.0), self))

    def __neg__(self):
        return Prod(Const(-1.0), self)

    def __mul__(self, other):
        return Prod(self, self._coerce(other))

    def __rmul__(self, other):
        return Prod(self._coerce(other), self)

    def __truediv__(self, other):
        return Prod(self, Recip(self._coerce(other)))

    def __rtruediv__(self, other):
        return Prod(self._coerce(other), Recip(self))

    def __pow__(self, exponent):
        if isinstance(exponent, Const):
            exponent = exponent.value
        if not isinstance(exponent, (int, float)):
            raise ExprError("power nodes require a real constant exponent")
        return Pow(self, float(exponent))


class Const(ScalarExpr):
    def __init__(self, value):
        self.value = float(value)

    def eval(self, env):
        return self.value

    def __repr__(self):
        return f"Const({self.value})"


class Var(ScalarExpr):
    def __init__(self, name):
        self.name = name

    def eval(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise ExprError(f"unbound variable {self.name!r}") from None

    def _collect(self, out):
        out.add(self.name)

    def __repr__(self):
        return f"Var({self.name!r})"


class Sum(ScalarExpr):
    def __init__(self, *terms):
        self.terms = terms

    def eval(self, env):
        acc = self.terms[0].eval(env)
        for t in self.terms[1:]:
            acc = acc + t.eval(env)
        return acc

    def _collect(self, out):
        for t in self.terms:
            t._collect(out)


class Prod(ScalarExpr):
    def __init__(self, *factors):
        self.factors = factors

    def eval(self, env):
        acc = self.factors[0].eval(env)
        for f in self.factors[1:]:
            acc = acc * f.eval(env)
        return acc

    def _collect(self, out):
        for f in self.factors:
            f._collect(out)


class Pow(ScalarExpr):
    def __init__(self, base, exponent):
        self.base = base
        self.exponent = float(exponent)

    def eval(self, env):
        b = self.base.eval(env)
        if isinstance(b, Jet):
            return b.pow_const(self.exponent)
        r = self.exponent
        if b <= 0.0 and r != round(r):
            raise ExprError(f"fractional power of non-positive base {b!r}")
        return b ** r

    def _collect(self, out):
        self.base._collect(out)


class _Unary(ScalarExpr):
    def __init__(self, arg):
        self.arg = arg

    def _collect(self, out):
        self.arg._collect(out)


class Exp(_Unary):
    def eval(self, env):
        u = self.arg.eval(env)
        return u.exp() if isinstance(u, Jet) else math.exp(u)


class Sin(_Unary):
    def eval(self, env):
        u = self.arg.eval(env)
        return u.sin() if isinstance(u, Jet) else math.sin(u)


class Cos(_Unary):
    def eval(self, env):
        u = self.arg.eval(env)
        return u.cos() if isinstance(u, Jet) else math.cos(u)


class Sqrt(_Unary):
    def eval(self, env):
        u = self.arg.eval(env)
        if isinstance(u, Jet):
            return u.sqrt()
        if u <= 0.0:
            raise ExprError(f"sqrt of non-positive value {u!r}")
        return math.sqrt(u)


class Recip(_Unary):
    def eval(self, env):
        u = self.arg.eval(env)
        if isinstance(u, Jet):
            return u.reciprocal()
        if u == 0.0:
            raise ExprError("reciprocal of zero")
        return 1.0 / u


def const(v):
    return Const(v)


def var(name):
    return Var(name)


def exp(e):
    return Exp(_as_expr(e))


def sin(e):
    return Sin(_as_expr(e))


def cos(e):
    return Cos(_as_expr(e))


def sqrt(e):
    return Sqrt(_as_expr(e))


def recip(e):
    return Recip(_as_expr(e))


def _as_expr(e):
    if isinstance(e, ScalarExpr):
        return e
    return Const(e)


# ---------------------------------------------------------------------------
# Jet-based evaluation helpers


def jet_env(names, values, order=2):
    """Environment mapping each name to a Jet seeded on its own slot."""
    values = [float(v) for v in values]
    return {nm: Jet.seed(values, i, order) for i, nm in enumerate(names)}


def eval_value(expr, names, values):
    env = dict(zip(names, map(float, values)))
    return float(expr.eval(env))


def eval_jet(expr, names, values, order=2):
    """Evaluate returning a Jet over the given coordinate ordering."""
    out = expr.eval(jet_env(names, values, order))
    if not isinstance(out, Jet):
        n = len(names)
        out = Jet.constant(out, n, order)
    if not math.isfinite(out.val):
        raise ExprError(f"expression not finite at {dict(zip(names, values))!r}")
    return out


# ---------------------------------------------------------------------------
# Infix parser for scenario files:  exp(t) + 2*t^2 - sin(0.5*t)

_FUNCS = {"exp": exp, "sin": sin, "cos": cos, "sqrt": sqrt}


class _Parser:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def error(self, message):
        raise ExprParseError(message, self.text, self.pos)

    def peek(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def parse(self):
        e = self.expr()
        if self.peek():
            self.error("trailing input")
        return e

    def expr(self):
        node = self.term()
        while True:
            c = self.peek()
            if c == "+":
                self.pos += 1
                node = node + self.term()
            elif c == "-":
                self.pos += 1
                node = node - self.term()
            else:
                return node

    def term(self):
        node = self.power()
        while True:
            c = self.peek()
            if c == "*" and not self.text.startswith("**", self.pos):
                self.pos += 1
                node = node * self.power()
            elif c == "/":
                self.pos += 1
                node = node / self.power()
            else:
                return node

    def power(self):
        base = self.unary()
        c = self.peek()
        if c == "^" or self.text.startswith("**", self.pos):
            self.pos += 2 if self.text.startswith("**", self.pos) else 1
            exponent = self.unary()
            return base ** self._require_const(exponent)
        return base

    def _require_const(self, node):
        if isinstance(node, Const):
            return node.value
        if isinstance(node, Prod) and len(node.factors) == 2:
            a, b = node.factors
            if isinstance(a, Const) and isinstance(b, Const):
                return a.value * b.value
        self.error("exponent must be a numeric constant")

    def unary(self):
        c = self.peek()
        if c == "-":
            self.pos += 1
            return -self.unary()
        if c == "+":
            self.pos += 1
            return self.unary()
        return self.atom()

    def atom(self):
        c = self.peek()
        if c == "(":
            self.pos += 1
            node = self.expr()
            if self.peek() != ")":
                self.error("expected ')'")
            self.pos += 1
            return node
        if c.isdigit() or c == ".":
            return Const(self.number())
        if c.isalpha() or c == "_":
            name = self.ident()
            if self.peek() == "(":
                return self.call(name)
            return Var(name)
        self.error("unexpected character")

    def number(self):
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isdigit() or self.text[self.pos] == "."):
            self.pos += 1
        if self.pos < len(self.text) and self.text[self.pos] in "eE":
            mark = self.pos
            self.pos += 1
            if self.pos < len(self.text) and self.text[self.pos] in "+-":
                self.pos += 1
            if self.pos < len(self.text) and self.text[self.pos].isdigit():
                while self.pos < len(self.text) and self.text[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = mark
        try:
            return float(self.text[start:self.pos])
        except ValueError:
            self.error("malformed number")

    def ident(self):
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
            self.pos += 1
        return self.text[start:self.pos]

    def call(self, name):
        self.pos += 1  # consume '('
        args = [self.expr()]
        while self.peek() == ",":
            self.pos += 1
            args.append(self.expr())
        if self.peek() != ")":
            self.error("expected ')'")
        self.pos += 1
        if name == "pow":
            if len(args) != 2:
                self.error("pow takes two arguments")
            return args[0] ** self._require_const(args[1])
        fn = _FUNCS.get(name)
        if fn is None:
            self.error(f"unknown function {name!r}")
        if len(args) != 1:
            self.error(f"{name} takes one argument")
        return fn(args[0])


def parse_expr(text):
    """Parse an infix expression string into a ScalarExpr."""
    if not text or not text.strip():
        raise ExprParseError("empty expression", text, 0)
    return _Parser(text).parse()
