import functools
from pathlib import Path

import numpy as np
import pytest

from carnot_ma.carnot import euclidean, heisenberg
from carnot_ma.expressions import Expression, coordinate_names
from carnot_ma.grid import Box, Grid, GridFunction
from carnot_ma.hamiltonian import Hamiltonian
from carnot_ma.solver import DirichletProblem, SolverConfig, solve

FIXTURES = Path(__file__).parent / "fixtures"
CUBE3 = Box((-1.0,) * 3, (1.0,) * 3)
SQUARE = Box((-1.0, -1.0), (1.0, 1.0))


def gauss_problem(resolution: int) -> DirichletProblem:
    """H^1 Gauss-curvature problem solved exactly by (x1^2 + x2^2)/2."""
    grid = Grid(CUBE3, (resolution,) * 3)
    exact = Expression("(x1^2 + x2^2)/2", coordinate_names(3))
    ham = Hamiltonian.gauss_curvature("(1 + x1^2 + x2^2)^(-2)", 3, 2)
    bd = GridFunction.from_callable(grid, exact.at_points)
    return DirichletProblem(heisenberg(), grid, ham, bd, 1e-3, exact, "h1-gauss")


def quartic_problem(resolution: int) -> DirichletProblem:
    """Non-quadratic manufactured solution, so the discretization error is visible."""
    grid = Grid(CUBE3, (resolution,) * 3)
    names = coordinate_names(3)
    exact = Expression("(x1^4 + x2^4)/12 + (x1^2 + x2^2)/2", names)
    k = ("(1 + x1^2)*(1 + x2^2) / (1 + (x1^3/3 + x1)^2 + (x2^3/3 + x2)^2)^2")
    ham = Hamiltonian.gauss_curvature(k, 3, 2)
    bd = GridFunction.from_callable(grid, exact.at_points)
    return DirichletProblem(heisenberg(), grid, ham, bd, 1e-3, exact, "h1-quartic")


def euclid_problem(resolution: int, boundary: str = "(x1^2 + x2^2)/2") -> DirichletProblem:
    grid = Grid(SQUARE, (resolution,) * 2)
    expr = Expression(boundary, coordinate_names(2))
    bd = GridFunction.from_callable(grid, expr.at_points)
    return DirichletProblem(euclidean(2), grid, Hamiltonian.constant_rhs(1.0, 2, 2), bd, 1e-3, expr, "euclid")


@functools.lru_cache(maxsize=None)
def solved_gauss(resolution: int):
    """Converged manufactured solve, shared across test modules."""
    problem = gauss_problem(resolution)
    return problem, solve(problem, SolverConfig())


def max_error(problem, u) -> float:
    return float(np.abs(u.values - problem.exact_solution().values).max())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
