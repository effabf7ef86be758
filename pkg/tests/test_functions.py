import math

import numpy as np
import pytest

from multiplicity_lab import ConfigError, DomainError
from multiplicity_lab.functions import (
    antiderivative,
    coefficient,
    fd_gradient,
    from_expression,
    functional,
    quad_antiderivative,
    reaction,
)


def test_reciprocal_antiderivative_closed_form_and_quadrature():
    w = coefficient("reciprocal", 1.0)
    assert antiderivative(w, 0.5, upper=1.0) == pytest.approx(math.log(2), rel=1e-14)
    assert quad_antiderivative(w, 0.5) == pytest.approx(math.log(2), rel=1e-10)
    assert antiderivative(w, 0.0, upper=1.0) == 0.0


def test_antiderivative_domain():
    w = coefficient("reciprocal", 1.0)
    with pytest.raises(DomainError):
        antiderivative(w, 1.2, upper=0.999)
    with pytest.raises(DomainError):
        antiderivative(w, -0.1, upper=0.999)


def test_polynomial_reaction_antiderivative():
    f = reaction("identity")
    assert antiderivative(f, 3.0) == pytest.approx(4.5)


def test_expression_without_closed_primitive_uses_quadrature():
    g = from_expression("exp(-u**2) * cos(u**3)", "u")
    assert antiderivative(g, 0.7) == pytest.approx(quad_antiderivative(g, 0.7), rel=1e-10)


def test_expression_coefficient_substitutes_rho():
    w = coefficient("rho/(rho - x)", 2.0)
    assert w(1.0) == pytest.approx(2.0)
    assert w.derivative(1.0) == pytest.approx(2.0)


def test_bad_expressions():
    with pytest.raises(ConfigError):
        reaction("u +* 2")
    with pytest.raises(ConfigError):
        reaction("u + v")
    with pytest.raises(ConfigError):
        functional("x0 + x5", dim=2)


def test_functional_gradient_matches_fd():
    J = functional("cos(x0) * x1 + x1**3", dim=2)
    X = np.random.default_rng(0).normal(size=(20, 2))
    assert np.allclose(J.grad(X), fd_gradient(J.value_batch, X), atol=1e-7)
    Jn = functional("cos(x0) * x1 + x1**3", dim=2, analytic_gradient=False)
    assert np.allclose(Jn.grad(X), J.grad(X), atol=1e-7)


def test_functional_single_point_and_batch():
    J = functional("cos", dim=1)
    assert J(np.array([0.0])) == 1.0
    assert np.allclose(J(np.array([[0.0], [math.pi]])), [1.0, -1.0])
    Z = functional("zero", dim=3)
    assert np.array_equal(Z.grad(np.ones((4, 3))), np.zeros((4, 3)))
