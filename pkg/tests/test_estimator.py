import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from carnot_ma.estimator import MongeAmpereSolver, check_points, check_problem
from carnot_ma.grid import Box

from conftest import euclid_problem, gauss_problem


def test_params_round_trip():
    est = MongeAmpereSolver(tol=1e-7, max_iter=20)
    assert est.get_params()["tol"] == 1e-7
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    est.set_params(max_iter=5)
    assert est.max_iter == 5


def test_fit_predict_score():
    problem = gauss_problem(9)
    est = MongeAmpereSolver().fit(problem)
    assert est.converged_ and est.n_iter_ >= 1 and est.residual_log_
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, (50, 3))
    # linear interpolation error of a quadratic is at most h^2 / 8 per axis
    y = (X[:, 0] ** 2 + X[:, 1] ** 2) / 2
    assert est.score(X, y) > -2 * 0.25**2 / 8 - 1e-6
    nodes = problem.grid.points()[:20]
    np.testing.assert_allclose(est.predict(nodes), problem.exact_solution().values.ravel()[:20], atol=1e-7)


def test_predict_before_fit():
    with pytest.raises(NotFittedError):
        MongeAmpereSolver().predict(np.zeros((1, 2)))


def test_input_validation():
    with pytest.raises(TypeError):
        check_problem("not a problem")
    with pytest.raises(ValueError, match="coordinates"):
        check_points(np.zeros((3, 2)), 3)
    with pytest.raises(ValueError, match="outside"):
        check_points(np.full((1, 2), 2.0), 2, Box((0, 0), (1, 1)))
    with pytest.raises(ValueError):
        check_points(np.array([[np.nan, 0.0]]), 2)
    with pytest.raises(ValueError, match="tol"):
        MongeAmpereSolver(tol=0).fit(euclid_problem(5))
