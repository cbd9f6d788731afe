from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import quad

from frontier_lab.exceptions import DomainError
from frontier_lab.kernels import (
    build_kernel,
    eval_kernel,
    eval_kernel_derivative,
    kernel_moment,
    kernel_order_for,
    kernel_table,
)


def test_biweight():
    K = build_kernel(2)
    c = Fraction(15, 16)
    assert K.exact_coeffs == (c, 0, -2 * c, 0, c)
    assert eval_kernel(K, 0.0) == 15 / 16
    assert eval_kernel(K, 1.0) == 0.0 and eval_kernel(K, -1.0) == 0.0


def test_order_four():
    K = build_kernel(4)
    assert K.q_coeffs == (Fraction(105, 64), Fraction(-315, 64))


@pytest.mark.parametrize("L", [2, 4, 6, 8, 10, 12])
def test_moments_by_quadrature(L):
    K = build_kernel(L)
    assert quad(lambda u: eval_kernel(K, u), -1, 1, epsabs=1e-13)[0] == pytest.approx(1.0, abs=1e-10)
    for r in range(1, L):
        assert quad(lambda u: u**r * eval_kernel(K, u), -1, 1, epsabs=1e-13)[0] == pytest.approx(0.0, abs=1e-10)
    # the order is exact: moment L does not vanish
    assert abs(kernel_moment(K, L)) > 1e-6


def test_kernel_moment_examples():
    assert kernel_moment(build_kernel(2), 0) == 1.0
    assert kernel_moment(build_kernel(2), 1) == 0.0
    assert kernel_moment(build_kernel(4), 2) == 0.0


@pytest.mark.parametrize("L", [2, 4, 6])
def test_boundary_values_and_symmetry(L):
    K = build_kernel(L)
    u = np.linspace(0, 1, 101)
    np.testing.assert_array_equal(eval_kernel(K, u), eval_kernel(K, -u))
    np.testing.assert_allclose(eval_kernel_derivative(K, u), -eval_kernel_derivative(K, -u), atol=1e-14)
    assert eval_kernel(K, 1.5) == 0.0 and eval_kernel_derivative(K, -1.5) == 0.0
    assert abs(eval_kernel_derivative(K, 1.0)) < 1e-12
    assert eval_kernel_derivative(K, 0.0) == 0.0


def test_derivative_matches_finite_difference():
    K = build_kernel(6)
    u = np.linspace(-0.95, 0.95, 39)
    step = 1e-6
    fd = (eval_kernel(K, u + step) - eval_kernel(K, u - step)) / (2 * step)
    np.testing.assert_allclose(eval_kernel_derivative(K, u), fd, atol=1e-6)


def test_lipschitz_derivative_of_biweight():
    # K'' = (15/16)(-4 + 12 u^2) peaks at u = +-1 with value 7.5
    assert build_kernel(2).lipschitz_derivative() == pytest.approx(7.5, rel=1e-9)


def test_kernel_order_for():
    assert kernel_order_for(1.0) == 2
    assert kernel_order_for(1.5) == 2
    assert kernel_order_for(2.0) == 4
    assert kernel_order_for(3.9) == 4
    assert kernel_order_for(4.0) == 6


@pytest.mark.parametrize("L", [0, 3, 14, -2])
def test_invalid_order(L):
    with pytest.raises(DomainError):
        build_kernel(L)


def test_kernel_table():
    t = kernel_table(build_kernel(2), 5)
    assert t.shape == (5, 3)
    np.testing.assert_allclose(t[:, 0], [-1, -0.5, 0, 0.5, 1])
    assert t[2, 1] == 15 / 16
