import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnot_ma.carnot import engel, euclidean, heisenberg
from carnot_ma.grid import Box, Grid, GridFunction
from carnot_ma.horizontal import (Convexity, PreconditionError, certify_convexity, euclid_jet, horizontal_jet,
                                  horizontal_jets, q_matrix)

CUBE = Box((-1.0,) * 3, (1.0,) * 3)


def test_quadratic_jet_in_heisenberg():
    g = Grid(CUBE, (9, 9, 9))
    u = GridFunction.from_callable(g, lambda x: (x[:, 0] ** 2 + x[:, 1] ** 2) / 2)
    jet = horizontal_jet(heisenberg(), u, (6, 3, 4))
    x = g.points().reshape(9, 9, 9, 3)[6, 3, 4]
    np.testing.assert_allclose(jet.p, x[:2], atol=1e-14)
    np.testing.assert_allclose(jet.S, np.eye(2), atol=1e-12)


def test_vertical_function_has_antisymmetric_part_removed():
    # u = x3: X1 X2 u = 1/2, X2 X1 u = -1/2, symmetrized Hessian is 0
    g = Grid(CUBE, (5, 5, 5))
    u = GridFunction.from_callable(g, lambda x: x[:, 2])
    _, S, _, _ = horizontal_jets(heisenberg(), u)
    np.testing.assert_allclose(S, 0, atol=1e-12)
    c = certify_convexity(heisenberg(), u)
    assert c.kind is Convexity.X_CONVEX and c.gamma == 0


def test_q_vanishes_on_heisenberg():
    x = np.random.default_rng(0).uniform(-1, 1, (50, 3))
    p = np.random.default_rng(1).standard_normal((50, 3))
    np.testing.assert_allclose(q_matrix(heisenberg(), x, p), 0, atol=1e-15)


def test_q_on_engel_matches_second_derivative():
    # u = x4: X2 X2 u = X2(x1^2/2) = 0 but X1 X2 u = x1 and X2 X1 u = 0; Q captures the x1 / 2 part
    x = np.array([0.7, 0.0, 0.0, 0.0])
    Q = q_matrix(engel(), x, np.array([0.0, 0.0, 0.0, 1.0]))
    np.testing.assert_allclose(Q, [[0.0, 0.35], [0.35, 0.0]], atol=1e-14)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
@settings(max_examples=40, deadline=None)
def test_quadratics_are_exact(a, b, c, d, e):
    g = Grid(CUBE, (5, 5, 5))

    def f(x):
        return a * x[:, 0] ** 2 + b * x[:, 0] * x[:, 1] + c * x[:, 1] ** 2 + d * x[:, 2] + e * x[:, 0] * x[:, 2]

    u = GridFunction.from_callable(g, f)
    p, S, du, _ = horizontal_jets(heisenberg(), u)
    x = g.interior_points()
    X1 = np.stack([np.ones(len(x)), np.zeros(len(x)), -x[:, 1] / 2], axis=1)
    X2 = np.stack([np.zeros(len(x)), np.ones(len(x)), x[:, 0] / 2], axis=1)
    grad = np.stack([2 * a * x[:, 0] + b * x[:, 1] + e * x[:, 2], b * x[:, 0] + 2 * c * x[:, 1],
                     d + e * x[:, 0]], axis=1)
    np.testing.assert_allclose(du, grad, atol=1e-11)
    np.testing.assert_allclose(p[:, 0], np.sum(X1 * grad, axis=1), atol=1e-11)
    # by hand: X1X1u = 2a - e x2, X2X2u = 2c, X1X2u = b + d/2 + e x1, X2X1u = b - d/2
    np.testing.assert_allclose(S[:, 0, 0], 2 * a - e * x[:, 1], atol=1e-10)
    np.testing.assert_allclose(S[:, 1, 1], 2 * c, atol=1e-10)
    np.testing.assert_allclose(S[:, 0, 1], b + e * x[:, 0] / 2, atol=1e-10)


def test_certificate_kinds():
    g = Grid(Box((-1.0, -1.0), (1.0, 1.0)), (9, 9))
    fr = euclidean(2)
    conv = GridFunction.from_callable(g, lambda x: x[:, 0] ** 2 + 3 * x[:, 1] ** 2)
    c = certify_convexity(fr, conv, gamma_request=1.0)
    assert c.kind is Convexity.UNIFORMLY_X_CONVEX and np.isclose(c.gamma, 2.0)
    c = certify_convexity(fr, conv, gamma_request=5.0)
    assert c.kind is Convexity.X_CONVEX
    saddle = GridFunction.from_callable(g, lambda x: x[:, 0] ** 2 - x[:, 1] ** 2)
    c = certify_convexity(fr, saddle)
    assert c.kind is Convexity.NOT_CERTIFIED and c.violating_node is not None
    # restricting to a region where the saddle is still a saddle changes nothing
    assert not certify_convexity(fr, saddle, region=Box((-0.5, -0.5), (0.5, 0.5))).certified


def test_region_restricts_check():
    g = Grid(Box((-1.0, -1.0), (1.0, 1.0)), (17, 17))
    # convex for x1 > 0, concave in x1 for x1 < 0
    u = GridFunction.from_callable(g, lambda x: x[:, 0] ** 3 + x[:, 1] ** 2)
    assert not certify_convexity(euclidean(2), u).certified
    assert certify_convexity(euclidean(2), u, region=Box((0.1, -0.9), (0.9, 0.9))).certified


def test_boundary_node_jet_rejected():
    g = Grid(CUBE, (5, 5, 5))
    with pytest.raises(PreconditionError):
        euclid_jet(GridFunction.zeros(g), (0, 2, 2))
    with pytest.raises(PreconditionError):
        horizontal_jet(heisenberg(), GridFunction.zeros(g), (2, 2))


def test_negative_gamma_request_rejected():
    g = Grid(CUBE, (5, 5, 5))
    with pytest.raises(ValueError):
        certify_convexity(heisenberg(), GridFunction.zeros(g), gamma_request=-1)
