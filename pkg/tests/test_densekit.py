"""
Tests for the dense linear algebra kit

Tests:
- mat_exp against closed forms and the inverse identity
- solve_dense on diagonal and random systems, singular pivots
- sym_part_bounds, spectral_norm, condition_number, matrix_root
"""

import math

import numpy as np
import pytest
import scipy.linalg

from pyphsim.core.densekit import (
    condition_number,
    mat_exp,
    matrix_root,
    solve_dense,
    spectral_norm,
    sym_part_bounds,
)
from pyphsim.core.errors import DimensionError, SingularMatrixError
from pyphsim.core.rng import make_rng


# ==============================================================================
# mat_exp
# ==============================================================================

def test_mat_exp_zero_is_identity():
    assert np.array_equal(mat_exp(np.zeros((2, 2))), np.eye(2))


def test_mat_exp_diagonal():
    expected = np.diag([math.exp(0.3), math.exp(-2.0)])
    np.testing.assert_allclose(mat_exp(np.diag([0.3, -2.0])), expected, rtol=1e-14)


def test_mat_exp_swap_gives_hyperbolic_functions():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    expected = np.array([[math.cosh(1), math.sinh(1)], [math.sinh(1), math.cosh(1)]])
    np.testing.assert_allclose(mat_exp(A), expected, rtol=1e-14)


def test_mat_exp_inverse_identity_and_scipy_agreement():
    rng = make_rng(3)
    for _ in range(10):
        A = rng.standard_normal((5, 5))
        A *= rng.uniform(0.1, 10.0) / np.linalg.norm(A, 2)
        E = mat_exp(A)
        np.testing.assert_allclose(E @ mat_exp(-A), np.eye(5), atol=1e-10)
        np.testing.assert_allclose(E, scipy.linalg.expm(A), rtol=1e-12, atol=1e-12)


def test_mat_exp_complex_rotation():
    theta = 0.7
    out = mat_exp(np.array([[1j * theta]]))
    assert out[0, 0] == pytest.approx(complex(math.cos(theta), math.sin(theta)), abs=1e-15)


def test_mat_exp_rejects_non_square():
    with pytest.raises(DimensionError):
        mat_exp(np.zeros((2, 3)))


# ==============================================================================
# solve_dense
# ==============================================================================

def test_solve_dense_identity_and_diagonal():
    B = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(solve_dense(np.eye(2), B), B)
    np.testing.assert_allclose(solve_dense(np.diag([2.0, 4.0]), np.array([2.0, 4.0])), [1.0, 1.0])


def test_solve_dense_random_residual():
    rng = make_rng(11)
    A = rng.standard_normal((6, 6)) + 6.0 * np.eye(6)
    B = rng.standard_normal((6, 3))
    X = solve_dense(A, B)
    assert np.linalg.norm(A @ X - B) <= 1e-10 * np.linalg.norm(B)


def test_solve_dense_reports_singular_pivot():
    A = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularMatrixError) as info:
        solve_dense(A, np.ones(2))
    assert info.value.pivot == 1


def test_solve_dense_shape_mismatch():
    with pytest.raises(DimensionError):
        solve_dense(np.eye(3), np.ones(2))


# ==============================================================================
# Spectral helpers
# ==============================================================================

def test_sym_part_bounds_examples():
    assert sym_part_bounds(np.eye(2)) == pytest.approx((1.0, 1.0))
    skew = np.array([[0.0, 1.0], [-1.0, 0.0]])
    assert sym_part_bounds(skew) == pytest.approx((0.0, 0.0), abs=1e-15)
    c, s = 1.0 / math.tanh(1.0), 1.0 / math.sinh(1.0)
    lo, hi = sym_part_bounds(np.array([[c, s], [s, c]]))
    assert lo == pytest.approx(0.4621, abs=1e-4)
    assert hi == pytest.approx(2.1640, abs=1e-4)


def test_spectral_norm_and_condition_number():
    A = np.diag([3.0, -0.5])
    assert spectral_norm(A) == pytest.approx(3.0)
    assert condition_number(A) == pytest.approx(6.0)
    assert condition_number(np.zeros((2, 2))) == math.inf


def test_matrix_root_of_scaled_identity():
    R = matrix_root(5.0 * np.eye(2), 4)
    np.testing.assert_allclose(R, 5.0 ** 0.25 * np.eye(2), rtol=1e-14)
    P = np.array([[2.0, 0.5], [0.5, 1.0]])
    R3 = matrix_root(P, 3)
    np.testing.assert_allclose(R3 @ R3 @ R3, P, rtol=1e-12)


def test_matrix_root_rejects_indefinite():
    with pytest.raises(ValueError):
        matrix_root(np.diag([1.0, -1.0]), 2)
    with pytest.raises(ValueError):
        matrix_root(np.eye(2), 0)
