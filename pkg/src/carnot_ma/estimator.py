"""Estimator-style wrapper around the Dirichlet solver."""

from __future__ import annotations

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .grid import GridFunction
from .solver import DirichletProblem, SolverConfig, solve


def check_problem(problem) -> DirichletProblem:
    if not isinstance(problem, DirichletProblem):
        raise TypeError(f"expected a DirichletProblem, got {type(problem).__name__}")
    return problem


def check_points(X, n: int, box=None) -> np.ndarray:
    """2-d float array of points in R^n, optionally inside ``box``."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != n:
        raise ValueError(f"points have {X.shape[1]} coordinates, expected {n}")
    if box is not None and not np.all(box.contains(X)):
        raise ValueError("points outside the problem box")
    return X


class MongeAmpereSolver(BaseEstimator):
    """Solve a :class:`DirichletProblem`; ``predict`` interpolates the solution.

    Attributes set by ``fit``: ``solution_`` (GridFunction), ``state_``,
    ``converged_``, ``n_iter_`` and ``residual_log_``.
    """

    def __init__(self, tol=1e-6, max_iter=50, max_halvings=30, linear_rtol=1e-10, seed=0):
        self.tol = tol
        self.max_iter = max_iter
        self.max_halvings = max_halvings
        self.linear_rtol = linear_rtol
        self.seed = seed

    def _config(self) -> SolverConfig:
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be >= 1")
        return SolverConfig(tol=self.tol, max_iter=int(self.max_iter), max_halvings=int(self.max_halvings),
                            linear_rtol=self.linear_rtol, seed=self.seed)

    def fit(self, problem, y=None, u0: GridFunction | None = None):
        problem = check_problem(problem)
        self.state_ = solve(problem, self._config(), u0)
        self.problem_ = problem
        self.solution_ = self.state_.u
        self.converged_ = self.state_.converged
        self.n_iter_ = self.state_.iterations
        self.residual_log_ = list(self.state_.residual_log)
        g = problem.grid
        self._interp = RegularGridInterpolator(tuple(g.axes()), self.solution_.values, method="linear")
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "solution_")
        X = check_points(X, self.problem_.grid.n, self.problem_.grid.box)
        return self._interp(X)

    def score(self, X, y) -> float:
        """Negative max absolute error, so larger is better."""
        y = np.asarray(y, dtype=float).ravel()
        return -float(np.max(np.abs(self.predict(X) - y)))
