import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnot_ma.comparison import lipschitz_h_check, monotonicity_constant
from carnot_ma.grid import Box
from carnot_ma.hamiltonian import Hamiltonian, HamiltonianError

BOX = Box((-1.0,) * 3, (1.0,) * 3)


def test_gauss_curvature_value():
    h = Hamiltonian.gauss_curvature("(1 + x1^2 + x2^2)^(-2)", 3, 2)
    x = np.array([[0.5, -1.0, 3.0]])
    q = np.array([[0.5, -1.0]])
    np.testing.assert_allclose(h(x, 0.0, q), 1.0, rtol=1e-14)
    np.testing.assert_allclose(h.root(x, 0.0, q), 1.0, rtol=1e-14)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 5))
@settings(max_examples=50, deadline=None)
def test_power_of_gradient_reduces_to_gauss(q1, q2, k):
    g = Hamiltonian.gauss_curvature(k, 3, 2)
    p = Hamiltonian.power_of_gradient(k, 4.0, 3, 2)
    x, q = np.zeros((1, 3)), np.array([[q1, q2]])
    np.testing.assert_allclose(g.log(x, 0, q), p.log(x, 0, q), rtol=1e-13)


def test_custom_expression_and_callable():
    e = Hamiltonian.custom("exp(u) * (1 + q1^2)", 2, 2)
    np.testing.assert_allclose(e(np.zeros((1, 2)), 1.0, [[1.0, 5.0]]), 2 * np.e)
    c = Hamiltonian.custom(lambda x, r, q: 1 + r**2, 2, 2)
    np.testing.assert_allclose(c(np.zeros((2, 2)), np.array([0.0, 2.0]), np.zeros((2, 2))), [1.0, 5.0])


def test_positivity_is_enforced():
    with pytest.raises(HamiltonianError, match=r"\]0, \+inf\["):
        Hamiltonian.gauss_curvature(-1.0, 3, 2).validate(BOX)
    with pytest.raises(HamiltonianError):
        Hamiltonian.constant_rhs("x1", 3, 2).validate(BOX)


def test_monotonicity_flag():
    assert Hamiltonian.custom("exp(u)", 3, 2).validate(BOX).monotone_in_u
    assert not Hamiltonian.custom("exp(-u)", 3, 2).validate(BOX).monotone_in_u
    assert Hamiltonian.gauss_curvature(1.0, 3, 2).validate(BOX).monotone_in_u


def test_lipschitz_constant_h():
    rep = lipschitz_h_check(Hamiltonian.constant_rhs(2.0, 3, 2), R=1, samples=500, box=BOX)
    assert rep.empirical == 0


def test_lipschitz_q_independent():
    rep = lipschitz_h_check(Hamiltonian.custom("exp(u)", 3, 2), R=1, samples=500, box=BOX)
    assert rep.empirical < 1e-12


def test_lipschitz_gauss_unit_k():
    rep = lipschitz_h_check(Hamiltonian.gauss_curvature(1.0, 3, 2), R=1, samples=4000, box=BOX)
    assert np.isclose(rep.analytic, 4.0)
    assert 2.0 < rep.empirical <= 4.0 + 1e-12


def test_monotonicity_constant_nonnegative_for_exp():
    assert monotonicity_constant(Hamiltonian.custom("exp(u)", 3, 2), R=1, samples=500, box=BOX) > 0
