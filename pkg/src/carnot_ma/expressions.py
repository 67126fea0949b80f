"""Minimal arithmetic expression grammar for problem and frame files.

Accepted: numeric constants, named variables, ``+ - * /``, powers written
as ``^`` or ``**``, unary signs, and the functions ``exp``, ``log`` and
``sqrt``. Anything else (attribute access, subscripts, other calls,
comparisons) is rejected before evaluation, so no user-supplied Python
ever runs.
"""

from __future__ import annotations

import ast
from typing import Callable, Mapping, Sequence

import numpy as np

FUNCTIONS: dict[str, Callable] = {"exp": np.exp, "log": np.log, "sqrt": np.sqrt}
CONSTANTS = {"pi": np.pi}

_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.BitXor)


class ExpressionError(ValueError):
    pass


def parse(text: str, variables: Sequence[str]) -> ast.expr:
    """Parse ``text`` and check every node against the grammar."""
    source = text.strip().replace("^", "**")
    if not source:
        raise ExpressionError("empty expression")
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    allowed = set(variables)
    for node in ast.walk(tree.body):
        if isinstance(node, (ast.BinOp, ast.UnaryOp, ast.Load)):
            if isinstance(node, ast.BinOp) and not isinstance(node.op, _BINOPS):
                raise ExpressionError(f"operator {type(node.op).__name__} not allowed in {text!r}")
            if isinstance(node, ast.UnaryOp) and not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise ExpressionError(f"operator {type(node.op).__name__} not allowed in {text!r}")
        elif isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise ExpressionError(f"constant {node.value!r} not allowed in {text!r}")
        elif isinstance(node, ast.Call):
            if (
                not isinstance(node.func, ast.Name)
                or node.func.id not in FUNCTIONS
                or len(node.args) != 1
                or node.keywords
            ):
                raise ExpressionError(f"only exp/log/sqrt of one argument allowed in {text!r}")
        elif isinstance(node, ast.Name):
            if node.id not in allowed and node.id not in FUNCTIONS and node.id not in CONSTANTS:
                raise ExpressionError(f"unknown name {node.id!r} in {text!r}")
        elif not isinstance(node, (ast.operator, ast.unaryop)):
            raise ExpressionError(f"{type(node).__name__} not allowed in {text!r}")
    return tree.body


def _eval(node: ast.expr, env: Mapping[str, object]):
    if isinstance(node, ast.Constant):
        return node.value
    if isinstance(node, ast.Name):
        if node.id in env:
            return env[node.id]
        return CONSTANTS[node.id]
    if isinstance(node, ast.UnaryOp):
        val = _eval(node.operand, env)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.Call):
        return FUNCTIONS[node.func.id](_eval(node.args[0], env))
    left = _eval(node.left, env)
    right = _eval(node.right, env)
    op = node.op
    if isinstance(op, ast.Add):
        return left + right
    if isinstance(op, ast.Sub):
        return left - right
    if isinstance(op, ast.Mult):
        return left * right
    if isinstance(op, ast.Div):
        return left / right
    return np.power(left, right) if isinstance(left, np.ndarray) else left**right


class Expression:
    """A parsed closed-form expression, evaluated elementwise on arrays."""

    def __init__(self, text: str, variables: Sequence[str]):
        self.text = text
        self.variables = tuple(variables)
        self._tree = parse(text, self.variables)

    def __call__(self, **values):
        missing = [v for v in self.variables if v not in values]
        if missing:
            raise ExpressionError(f"missing values for {missing} in {self.text!r}")
        env = {k: np.asarray(v, dtype=float) for k, v in values.items()}
        with np.errstate(all="ignore"):
            out = _eval(self._tree, env)
        shape = np.broadcast_shapes(*(np.shape(v) for v in env.values())) if env else ()
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()

    def at_points(self, points: np.ndarray, **extra) -> np.ndarray:
        """Evaluate with ``x1..xn`` bound to the columns of ``points``."""
        points = np.atleast_2d(points)
        coords = {f"x{i + 1}": points[:, i] for i in range(points.shape[1])}
        coords.update(extra)
        return self(**coords)

    def __repr__(self):
        return f"Expression({self.text!r})"


def coordinate_names(n: int) -> list[str]:
    return [f"x{i + 1}" for i in range(n)]
