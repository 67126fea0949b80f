from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnot_ma.expressions import Expression, ExpressionError, coordinate_names
from carnot_ma.polynomial import Polynomial

X3 = coordinate_names(3)


def test_grammar_evaluates_elementwise():
    e = Expression("exp(x1) * x2^2 - sqrt(x3) / 2 + log(pi)", X3)
    pts = np.array([[0.0, 1.0, 4.0], [1.0, 2.0, 9.0]])
    want = np.exp(pts[:, 0]) * pts[:, 1] ** 2 - np.sqrt(pts[:, 2]) / 2 + np.log(np.pi)
    np.testing.assert_allclose(e.at_points(pts), want, rtol=1e-15)


@pytest.mark.parametrize("text", [
    "__import__('os')", "x1.real", "x1[0]", "x1 < 2", "sin(x1)", "lambda: 1", "x4", "'a'",
    "exp(x1, x2)", "x1 if x2 else x3", "", "x1 // 2",
])
def test_grammar_rejects(text):
    with pytest.raises(ExpressionError):
        Expression(text, X3)


def test_missing_variable_is_reported():
    with pytest.raises(ExpressionError, match="missing"):
        Expression("x1 + x2", X3)(x1=1.0)


def test_caret_is_power():
    assert Expression("2^3", [])() == 8.0


def test_polynomial_parse_and_structure():
    p = Polynomial.parse("x1^2*x2/2 - 3*x3 + 1", 3)
    assert p.degree() == 3
    assert p.variables() == {0, 1, 2}
    assert p.terms[(2, 1, 0)] == Fraction(1, 2)
    assert p.weighted_degrees([1, 1, 2]) == {3, 2, 0}
    np.testing.assert_allclose(p(np.array([2.0, 3.0, 1.0])), 4.0)


def test_polynomial_rejects_non_polynomials():
    with pytest.raises(ExpressionError):
        Polynomial.parse("exp(x1)", 2)
    with pytest.raises(ExpressionError):
        Polynomial.parse("1/x1", 2)


coeffs = st.integers(-5, 5)
small_poly = st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3)), coeffs, max_size=5)


@given(small_poly, small_poly, st.tuples(st.floats(-2, 2), st.floats(-2, 2)))
@settings(max_examples=60, deadline=None)
def test_polynomial_ring_ops_match_evaluation(a, b, pt):
    P, Q = Polynomial(2, a), Polynomial(2, b)
    x = np.array(pt)
    assert np.isclose((P * Q)(x), P(x) * Q(x), atol=1e-9)
    assert np.isclose((P + Q)(x), P(x) + Q(x), atol=1e-9)
    assert np.isclose((P - Q)(x), P(x) - Q(x), atol=1e-9)


@given(small_poly, small_poly)
@settings(max_examples=60, deadline=None)
def test_product_rule(a, b):
    P, Q = Polynomial(2, a), Polynomial(2, b)
    for i in range(2):
        assert (P * Q).diff(i) == P.diff(i) * Q + P * Q.diff(i)
