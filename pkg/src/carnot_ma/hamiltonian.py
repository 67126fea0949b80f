"""Lower-order term H(x, u, q) of  -det(D_X^2 u) + H(x, u, D_X u) = 0.

Evaluators take ``x`` of shape ``(N, n)``, ``r`` of shape ``(N,)`` and
``q`` of shape ``(N, m)``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .expressions import Expression, coordinate_names
from .grid import Box


class HamiltonianError(ValueError):
    pass


def _field(f, n: int):
    """Coerce a constant, expression text, Expression or callable to ``x -> array``."""
    if isinstance(f, (int, float)):
        c = float(f)
        return lambda x: np.full(np.atleast_2d(x).shape[0], c)
    if isinstance(f, str):
        f = Expression(f, coordinate_names(n))
    if isinstance(f, Expression):
        return f.at_points
    if callable(f):
        return lambda x: np.asarray(f(np.atleast_2d(x)), dtype=float)
    raise TypeError(f"cannot use {f!r} as a scalar field")


class Hamiltonian:
    """Positive Hamiltonian with ``H``, ``H^(1/m)`` and ``log H`` evaluators.

    Use the constructors :meth:`gauss_curvature`, :meth:`power_of_gradient`,
    :meth:`constant_rhs` and :meth:`custom`.
    """

    def __init__(self, kind: str, n: int, m: int, log_h: Callable, params: dict | None = None):
        self.kind = kind
        self.n, self.m = n, m
        self._log_h = log_h
        self.params = params or {}
        self.monotone_in_u: bool | None = None

    @classmethod
    def gauss_curvature(cls, k, n: int, m: int) -> "Hamiltonian":
        """``k(x) (1 + |q|^2)^((m+2)/2)``: prescribed horizontal Gauss curvature."""
        kf = _field(k, n)
        beta = (m + 2) / 2

        def log_h(x, r, q):
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.log(kf(x)) + beta * np.log1p(np.sum(q * q, axis=1))

        return cls("gauss_curvature", n, m, log_h, {"k": _describe(k)})

    @classmethod
    def power_of_gradient(cls, f, beta: float, n: int, m: int) -> "Hamiltonian":
        """``f(x) (1 + |q|^2)^(beta/2)``; ``beta = m + 2`` is the Gauss case."""
        ff = _field(f, n)

        def log_h(x, r, q):
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.log(ff(x)) + beta / 2 * np.log1p(np.sum(q * q, axis=1))

        return cls("power_of_gradient", n, m, log_h, {"f": _describe(f), "beta": beta})

    @classmethod
    def constant_rhs(cls, f, n: int, m: int) -> "Hamiltonian":
        ff = _field(f, n)

        def log_h(x, r, q):
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.log(ff(x))

        return cls("constant_rhs", n, m, log_h, {"f": _describe(f)})

    @classmethod
    def custom(cls, expr, n: int, m: int) -> "Hamiltonian":
        """Expression in ``x1..xn``, ``u`` and ``q1..qm``, or a callable ``(x, r, q) -> H``."""
        if isinstance(expr, str):
            expr = Expression(expr, coordinate_names(n) + ["u"] + [f"q{j + 1}" for j in range(m)])
        if isinstance(expr, Expression):
            e = expr

            def h(x, r, q):
                env = {f"x{i + 1}": x[:, i] for i in range(n)}
                env.update({f"q{j + 1}": q[:, j] for j in range(m)})
                return e(u=r, **env)
        else:
            h = expr

        def log_h(x, r, q):
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.log(np.asarray(h(x, r, q), dtype=float))

        return cls("custom_expression", n, m, log_h, {"expression": _describe(expr)})

    # evaluators --------------------------------------------------------
    def _args(self, x, r, q):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        N = x.shape[0]
        r = np.broadcast_to(np.asarray(r, dtype=float), (N,))
        q = np.broadcast_to(np.atleast_2d(np.asarray(q, dtype=float)), (N, self.m))
        return x, r, q

    def log(self, x, r, q) -> np.ndarray:
        return self._log_h(*self._args(x, r, q))

    def __call__(self, x, r, q) -> np.ndarray:
        return np.exp(self.log(x, r, q))

    def root(self, x, r, q) -> np.ndarray:
        """``H^(1/m)``."""
        return np.exp(self.log(x, r, q) / self.m)

    # checks ----------------------------------------------------------
    def sample(self, box: Box, R: float, samples: int, seed: int):
        rng = np.random.default_rng(seed)
        x = rng.uniform(box.lower, box.upper, size=(samples, self.n))
        r = rng.uniform(-R, R, size=samples)
        q = rng.standard_normal((samples, self.m))
        q *= (R * rng.uniform(0, 1, size=(samples, 1)) ** (1 / self.m)) / np.linalg.norm(q, axis=1, keepdims=True)
        return x, r, q

    def validate(self, box: Box, R: float = 1.0, samples: int = 2000, seed: int = 0) -> "Hamiltonian":
        """Sampled positivity (raises) and monotonicity in ``u`` (recorded)."""
        x, r, q = self.sample(box, R, samples, seed)
        lh = self.log(x, r, q)
        bad = ~np.isfinite(lh)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise HamiltonianError(
                f"H must be positive on the domain (values in ]0, +inf[); "
                f"H({x[i].tolist()}, {r[i]:.3g}, {q[i].tolist()}) is not")
        shift = np.random.default_rng(seed + 1).uniform(0, R, size=samples)
        r2 = np.minimum(r + shift, R)
        self.monotone_in_u = bool(np.all(self.log(x, r2, q) >= lh - 1e-12 * (1 + np.abs(lh))))
        return self

    def to_dict(self):
        return {"kind": self.kind, **self.params, "monotone_in_u": self.monotone_in_u}


def _describe(f):
    if isinstance(f, Expression):
        return f.text
    if isinstance(f, (int, float, str)):
        return f
    return getattr(f, "__name__", "callable")
