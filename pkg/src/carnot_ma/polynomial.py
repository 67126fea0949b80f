"""Sparse multivariate polynomials with exact rational coefficients.

A polynomial in ``n`` variables is a map from exponent tuples to
``Fraction`` coefficients. Float inputs are converted exactly, so
differentiation and Lie brackets never introduce rounding.
"""

from __future__ import annotations

import ast
from fractions import Fraction
from numbers import Rational, Real

import numpy as np

from .expressions import ExpressionError, coordinate_names, parse


def _coef(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (Rational, int)):
        return Fraction(value)
    if isinstance(value, Real):
        return Fraction(float(value))
    raise TypeError(f"unsupported coefficient {value!r}")


class Polynomial:
    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms=None):
        self.nvars = int(nvars)
        clean = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.nvars or min(exps, default=0) < 0:
                raise ValueError(f"bad exponent tuple {exps} for {nvars} variables")
            c = _coef(c)
            if c:
                clean[exps] = clean.get(exps, Fraction(0)) + c
        self.terms = {k: v for k, v in clean.items() if v}

    @classmethod
    def constant(cls, nvars: int, value) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars: int, index: int) -> "Polynomial":
        exps = [0] * nvars
        exps[index] = 1
        return cls(nvars, {tuple(exps): 1})

    @classmethod
    def parse(cls, text: str, nvars: int) -> "Polynomial":
        """Build from an expression in ``x1..xn`` using ``+ - * /`` and integer powers."""
        tree = parse(text, coordinate_names(nvars))
        return _to_poly(tree, nvars, text)

    # arithmetic -------------------------------------------------------
    def _lift(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError("polynomials in different numbers of variables")
            return other
        return Polynomial.constant(self.nvars, other)

    def __add__(self, other):
        other = self._lift(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, Fraction(0)) + v
        return Polynomial(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        out: dict = {}
        for ka, va in self.terms.items():
            for kb, vb in other.terms.items():
                k = tuple(a + b for a, b in zip(ka, kb))
                out[k] = out.get(k, Fraction(0)) + va * vb
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Polynomial):
            if not other.is_constant() or other.is_zero():
                raise ZeroDivisionError("division only by nonzero constants")
            other = other.terms[(0,) * self.nvars]
        c = _coef(other)
        if c == 0:
            raise ZeroDivisionError("division by zero")
        return Polynomial(self.nvars, {k: v / c for k, v in self.terms.items()})

    def __pow__(self, power: int):
        if int(power) != power or power < 0:
            raise ValueError("only nonnegative integer powers")
        out = Polynomial.constant(self.nvars, 1)
        for _ in range(int(power)):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, (int, float, Fraction)):
            other = Polynomial.constant(self.nvars, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    # structure --------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(sum(k) == 0 for k in self.terms)

    def degree(self) -> int:
        return max((sum(k) for k in self.terms), default=-1)

    def weighted_degrees(self, weights) -> set[int]:
        return {sum(e * w for e, w in zip(k, weights)) for k in self.terms}

    def variables(self) -> set[int]:
        """Indices of variables that actually occur."""
        return {i for k in self.terms for i, e in enumerate(k) if e}

    def diff(self, index: int) -> "Polynomial":
        out = {}
        for k, v in self.terms.items():
            if k[index]:
                kk = list(k)
                kk[index] -= 1
                out[tuple(kk)] = v * k[index]
        return Polynomial(self.nvars, out)

    def __call__(self, points) -> np.ndarray:
        """Evaluate at a single point (shape ``(n,)``) or a batch ``(N, n)``."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        out = np.zeros(pts.shape[0])
        for k, v in self.terms.items():
            term = np.full(pts.shape[0], float(v))
            for i, e in enumerate(k):
                if e:
                    term = term * pts[:, i] ** e
            out += term
        return out[0] if single else out

    def __repr__(self):
        if not self.terms:
            return "0"
        names = coordinate_names(self.nvars)
        parts = []
        for k in sorted(self.terms, reverse=True):
            mono = "*".join(
                n if e == 1 else f"{n}^{e}" for n, e in zip(names, k) if e
            )
            c = self.terms[k]
            parts.append(f"({c})" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)


def _to_poly(node, nvars: int, text: str) -> Polynomial:
    if isinstance(node, ast.Constant):
        return Polynomial.constant(nvars, node.value)
    if isinstance(node, ast.Name):
        names = coordinate_names(nvars)
        if node.id not in names:
            raise ExpressionError(f"{node.id!r} is not a polynomial variable in {text!r}")
        return Polynomial.variable(nvars, names.index(node.id))
    if isinstance(node, ast.UnaryOp):
        val = _to_poly(node.operand, nvars, text)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.BinOp):
        left = _to_poly(node.left, nvars, text)
        right = _to_poly(node.right, nvars, text)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        if isinstance(node.op, ast.Div):
            if not right.is_constant() or right.is_zero():
                raise ExpressionError(f"division only by nonzero constants in {text!r}")
            return left / right
        if isinstance(node.op, (ast.Pow, ast.BitXor)):
            if not right.is_constant():
                raise ExpressionError(f"non-constant exponent in {text!r}")
            exp = right.terms.get((0,) * nvars, Fraction(0))
            if exp.denominator != 1 or exp < 0:
                raise ExpressionError(f"polynomial powers must be nonnegative integers in {text!r}")
            return left ** int(exp)
    raise ExpressionError(f"not a polynomial expression: {text!r}")
