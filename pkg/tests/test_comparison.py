import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnot_ma.carnot import euclidean, heisenberg
from carnot_ma.comparison import (MU_LADDER, PerturbationParams, certify_strict_subsolution, first_strict_mu,
                                  gradient_bound, level_residual, perturb, strictness_sweep, verify_comparison)
from carnot_ma.grid import Box, Grid, GridFunction
from carnot_ma.horizontal import Convexity, certify_convexity
from carnot_ma.solver import SolverConfig, solve

from conftest import CUBE3, euclid_problem, gauss_problem, solved_gauss

HALF3 = CUBE3.scaled(0.5)


def test_perturb_values():
    g = Grid(CUBE3, (5, 5, 5))
    u = perturb(GridFunction.zeros(g), PerturbationParams(0.3, 2.0), 2)
    # x3 does not enter the exponent
    np.testing.assert_allclose(u.values[2, 2, :], 0.3)
    np.testing.assert_allclose(u.values[4, 4, 0], 0.3 * np.exp(2.0))


def test_perturb_linear_in_epsilon():
    g = Grid(CUBE3, (5, 5, 5))
    u = GridFunction.from_callable(g, lambda x: x[:, 0])
    a = perturb(u, PerturbationParams(1e-3, 3.0), 2).values - u.values
    b = perturb(u, PerturbationParams(2e-3, 3.0), 2).values - u.values
    np.testing.assert_allclose(b, 2 * a, rtol=0, atol=1e-15)


def test_perturb_params_positive():
    with pytest.raises(ValueError):
        PerturbationParams(0.0, 1.0)
    with pytest.raises(ValueError):
        PerturbationParams(1.0, -1.0)


def test_perturb_overflow_names_exponent():
    g = Grid(Box((-10.0,) * 3, (10.0,) * 3), (3, 3, 3))
    with pytest.raises(OverflowError, match="exponent reaches 1e\\+05"):
        perturb(GridFunction.zeros(g), PerturbationParams(1.0, 1000.0), 2)


@given(st.floats(1e-3, 1.0), st.floats(0.1, 4.0))
@settings(max_examples=15, deadline=None)
def test_perturbation_gains_uniform_convexity(eps, mu):
    g = Grid(CUBE3, (41, 41, 3))
    c = certify_convexity(heisenberg(), perturb(GridFunction.zeros(g), PerturbationParams(eps, mu), 2),
                          gamma_request=eps * mu * (1 - 1e-6))
    assert c.kind is Convexity.UNIFORMLY_X_CONVEX
    assert c.gamma >= eps * mu * (1 - 1e-6)


def test_exact_solution_is_not_strict():
    problem = gauss_problem(9)
    cert = certify_strict_subsolution(problem, problem.exact_solution(), HALF3)
    assert not cert.certified and abs(cert.margin) < 1e-10


def test_perturbed_exact_solution_is_strict():
    problem = gauss_problem(17)
    rows = strictness_sweep(problem, problem.exact_solution(), 0.1, HALF3)
    mu = first_strict_mu(rows)
    assert mu is not None
    cert = certify_strict_subsolution(problem, perturb(problem.exact_solution(), PerturbationParams(0.1, mu), 2),
                                      HALF3, "det_power")
    assert cert.certified and cert.margin > 0
    # log level is strict as well at the same parameters
    cert = certify_strict_subsolution(problem, perturb(problem.exact_solution(), PerturbationParams(0.1, mu), 2),
                                      HALF3, "log_level")
    assert cert.certified


def test_strictness_margin_nondecreasing_in_epsilon():
    problem = gauss_problem(17)
    u = problem.exact_solution()
    margins = [certify_strict_subsolution(problem, perturb(u, PerturbationParams(e, 2.0), 2), HALF3).margin
               for e in (1e-3, 1e-2, 5e-2, 1e-1)]
    assert all(b >= a for a, b in zip(margins, margins[1:]))


def test_nonconvex_node_fails_strictness():
    problem = gauss_problem(9)
    u = problem.exact_solution().copy()
    u.values[4, 4, 4] += 1.0
    cert = certify_strict_subsolution(problem, u, HALF3)
    assert not cert.certified and cert.violating_node is not None
    assert "X-convex" in cert.reason


def test_subdomain_must_be_interior():
    problem = gauss_problem(9)
    with pytest.raises(ValueError, match="inside"):
        certify_strict_subsolution(problem, problem.exact_solution(), CUBE3)


def test_level_residual_infinite_where_not_convex():
    problem = euclid_problem(9)
    u = GridFunction.from_callable(problem.grid, lambda x: x[:, 0] ** 2 - x[:, 1] ** 2)
    res, lam = level_residual(problem, u, "det_power")
    assert np.all(np.isinf(res)) and np.all(lam < 0)


def test_gradient_bound_examples():
    g = Grid(Box((-1.0, -1.0), (1.0, 1.0)), (17, 17))
    u = GridFunction.from_callable(g, lambda x: np.sum(x**2, axis=1) / 2)
    rep = gradient_bound(euclidean(2), u, Box((-0.5, -0.5), (0.5, 0.5)))
    assert np.isclose(rep.C, np.sqrt(2) / 2) and rep.convexity_certified
    g3 = Grid(CUBE3, (9, 9, 9))
    u3 = GridFunction.from_callable(g3, lambda x: (x[:, 0] ** 2 + x[:, 1] ** 2) / 2)
    rep = gradient_bound(heisenberg(), u3, HALF3)
    assert np.isclose(rep.C, np.sqrt(0.5))


def test_gradient_bound_monotone_in_subdomain():
    g = Grid(CUBE3, (9, 9, 9))
    u = GridFunction.from_callable(g, lambda x: np.exp(x[:, 0]) + x[:, 1] ** 2 + x[:, 2] * x[:, 0])
    small = gradient_bound(heisenberg(), u, CUBE3.scaled(0.3)).C
    big = gradient_bound(heisenberg(), u, CUBE3.scaled(0.8)).C
    assert small <= big


@pytest.fixture(scope="module")
def h1():
    return solved_gauss(17)


def test_verify_self(h1):
    problem, state = h1
    rep = verify_comparison(problem, state.u, state.u, tol=1e-5)
    assert rep.verdict is True and rep.sup_gap == 0 and rep.boundary_gap == 0
    assert rep.mu_bar is not None and len(rep.epsilon_ladder) == 4


def test_verify_constant_shift(h1):
    problem, state = h1
    rep = verify_comparison(problem, state.u - 0.1, state.u, tol=1e-5)
    assert rep.verdict is True
    assert np.isclose(rep.sup_gap, -0.1) and rep.boundary_gap == 0


def test_verify_boundary_shift(h1):
    problem, state = h1
    v = solve(problem.with_boundary(problem.boundary_data.values + 0.1), SolverConfig())
    rep = verify_comparison(problem, v.u, state.u, tol=1e-5)
    # sub is the raised solution: gaps both sit at the shift
    assert rep.verdict is True
    assert np.isclose(rep.boundary_gap, 0.1) and abs(rep.sup_gap - 0.1) < 1e-3


def test_bump_rejected_at_preconditions(h1):
    problem, state = h1
    pts = problem.grid.points()
    bump = 0.1 * np.exp(-np.sum(pts**2, axis=1) / 0.09).reshape(problem.grid.shape)
    rep = verify_comparison(problem, GridFunction(problem.grid, state.u.values + bump), state.u, tol=1e-5)
    assert rep.verdict is None
    assert rep.diagnostics and not rep.preconditions_ok
    assert rep.to_dict()["verdict"] is None


def test_mu_ladder():
    assert MU_LADDER[0] == 1 and MU_LADDER[-1] == 1024 and len(MU_LADDER) == 11
