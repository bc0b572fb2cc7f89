import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osde_qmci.errors import DomainError, QuadratureError
from osde_qmci.legendre import eval_p
from osde_qmci.quad import GAUSS_WEIGHTS, KRONROD_WEIGHTS, integrate_1d, integrate_2d
from osde_qmci.rbm import transition_density


def test_rule_weights_sum_to_two():
    assert KRONROD_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)
    assert GAUSS_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)


@pytest.mark.parametrize(
    "f, a, b, expected",
    [
        (lambda x: x**2, -1.0, 1.0, 2 / 3),
        (lambda x: eval_p(2, x) ** 2, -1.0, 1.0, 0.4),
        (np.exp, 0.0, 1.0, math.e - 1),
    ],
)
def test_integrate_1d_examples(f, a, b, expected):
    r = integrate_1d(f, a, b, 1e-10)
    assert r.value == pytest.approx(expected, abs=1e-10)
    assert r.abs_error_estimate >= 0
    assert r.evaluations > 0


@settings(max_examples=40, deadline=None)
@given(coeffs=st.lists(st.floats(-5, 5), min_size=11, max_size=11))
def test_polynomials_exact_without_subdivision(coeffs):
    poly = np.polynomial.Polynomial(coeffs)
    exact = poly.integ()(1.0) - poly.integ()(-1.0)
    r = integrate_1d(poly, -1.0, 1.0, 1e-10)
    assert r.evaluations == 15
    assert r.value == pytest.approx(exact, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(alpha=st.floats(-3, 3), beta=st.floats(-3, 3), k=st.floats(0.1, 5))
def test_linearity(alpha, beta, k):
    tol = 1e-10
    f = lambda x: np.sin(k * x)
    g = lambda x: np.exp(-k * x**2)
    lhs = integrate_1d(lambda x: alpha * f(x) + beta * g(x), -1, 1, tol).value
    rhs = alpha * integrate_1d(f, -1, 1, tol).value + beta * integrate_1d(g, -1, 1, tol).value
    assert lhs == pytest.approx(rhs, abs=2 * tol * (1 + abs(alpha) + abs(beta)))


def test_adaptive_refinement_on_kink():
    r = integrate_1d(np.abs, -1.0, 0.7, 1e-10)
    assert r.value == pytest.approx(0.5 + 0.245, abs=1e-10)
    assert r.evaluations > 15


def test_subdivision_limit_raises():
    with pytest.raises(QuadratureError) as info:
        integrate_1d(lambda x: 1.0 / np.sqrt(np.abs(x - 0.3)), 0.0, 1.0, 1e-14)
    assert info.value.where is not None


def test_bad_arguments():
    with pytest.raises(DomainError):
        integrate_1d(np.exp, 1.0, 0.0, 1e-8)
    with pytest.raises(DomainError):
        integrate_1d(np.exp, 0.0, 1.0, 0.0)


def test_integrate_2d_examples():
    assert integrate_2d(lambda x, y: x * y, ((-1, 1), (-1, 1)), 1e-9).value == pytest.approx(0.0, abs=1e-9)
    assert integrate_2d(lambda x, y: np.ones_like(y), ((-1, 1), (-1, 1)), 1e-9).value == pytest.approx(4.0)


def test_integrate_2d_rbm_integrand_against_midpoint(demo_kernel):
    fhat = lambda x: 0.5 + 0.2 * x
    dt = 0.2

    def f(x, y):
        return fhat(x) * transition_density(demo_kernel, x, 0.0, y, dt) * (1 + y) / 2

    val = integrate_2d(f, ((-1, 1), (-1, 1)), 1e-8).value
    n = 1000
    mid = -1 + (np.arange(n) + 0.5) * (2 / n)
    X, Y = np.meshgrid(mid, mid, indexing="ij")
    oracle = np.sum(f(X, Y)) * (2 / n) ** 2
    assert val == pytest.approx(oracle, abs=1e-5)
