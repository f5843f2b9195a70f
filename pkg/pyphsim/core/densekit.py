"""
Dense Linear Algebra Kit for pyphsim

Small dense kernels every other module builds on:
- mat_exp: Pade(13) scaling and squaring matrix exponential
- solve_dense: partial pivoting LU solve with pivot inspection
- sym_part_bounds: spectrum bounds of the Hermitian part
- spectral_norm, condition_number, matrix_root

All routines accept real or complex square matrices and never mutate
their arguments.
"""

import logging
import math
from typing import Tuple

import numpy as np
import scipy.linalg

from .constants import SolverDefaults
from .errors import DimensionError, RangeError, SingularMatrixError

logger = logging.getLogger(__name__)

# Pade(13) numerator coefficients and the 1-norm bound below which the
# unscaled approximant is accurate to double precision.
_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152


def _as_square(A: np.ndarray, name: str = "A") -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {A.shape}")
    if not np.issubdtype(A.dtype, np.complexfloating):
        A = A.astype(float)
    return A


def mat_exp(A: np.ndarray) -> np.ndarray:
    """
    Matrix exponential by Pade(13) scaling and squaring.

    Args:
        A: Square real or complex matrix

    Returns:
        exp(A) with the dtype of A

    Raises:
        DimensionError: If A is not square
        RangeError: If the result is not finite

    Example:
        >>> mat_exp(np.zeros((2, 2)))
        array([[1., 0.],
               [0., 1.]])
    """
    A = _as_square(A)
    n = A.shape[0]
    if n == 0:
        return A.copy()
    if not np.all(np.isfinite(A)):
        raise RangeError("mat_exp argument contains non-finite entries")

    norm1 = float(np.linalg.norm(A, 1))
    s = max(0, int(math.ceil(math.log2(norm1 / _THETA13)))) if norm1 > _THETA13 else 0
    As = A / (2.0**s)

    b = _PADE13
    ident = np.eye(n, dtype=As.dtype)
    A2 = As @ As
    A4 = A2 @ A2
    A6 = A4 @ A2
    with np.errstate(over="ignore", invalid="ignore"):
        U = As @ (
            A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
            + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident
        )
        V = (
            A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
            + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
        )
        try:
            X = scipy.linalg.solve(V - U, V + U)
        except (ValueError, np.linalg.LinAlgError) as e:
            raise RangeError(f"mat_exp Pade denominator failed: {e}") from e
        for _ in range(s):
            X = X @ X

    if not np.all(np.isfinite(X)):
        raise RangeError(f"mat_exp overflowed (||A||_1 = {norm1:.3e}, squarings = {s})")
    logger.debug("mat_exp: n=%d, ||A||_1=%.3e, squarings=%d", n, norm1, s)
    return X


def lu_checked(A: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    LU factors of A, rejecting pivots with |u_ii| <= 1e-13 * ||A||_inf.

    Returns:
        (lu, piv) as produced by scipy.linalg.lu_factor

    Raises:
        SingularMatrixError: Naming the first vanishing pivot
    """
    A = _as_square(A)
    scale = float(np.linalg.norm(A, np.inf))
    lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    diag = np.abs(np.diag(lu))
    threshold = SolverDefaults.PIVOT_TOL * scale
    small = np.flatnonzero(diag <= threshold)
    if scale == 0.0 or small.size:
        pivot = int(small[0]) if small.size else 0
        raise SingularMatrixError(
            f"matrix is singular to working precision: pivot {pivot} "
            f"has magnitude {diag[pivot]:.3e} (threshold {threshold:.3e})",
            pivot=pivot,
        )
    return lu, piv


def solve_dense(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Solve A x = b by LU with partial pivoting.

    A pivot with |u_ii| <= 1e-13 * ||A||_inf is treated as zero.

    Args:
        A: Square matrix (n x n)
        b: Right-hand side (n,) or (n, k)

    Returns:
        Solution with the shape of b

    Raises:
        DimensionError: On incompatible shapes
        SingularMatrixError: Naming the first vanishing pivot
    """
    A = _as_square(A)
    b = np.asarray(b)
    n = A.shape[0]
    if b.shape[0] != n:
        raise DimensionError(f"b must have {n} rows to match A, got shape {b.shape}")
    if n == 0:
        return b.astype(np.result_type(A, b, float))
    return scipy.linalg.lu_solve(lu_checked(A), b)


def sym_part_bounds(A: np.ndarray) -> Tuple[float, float]:
    """
    Extreme eigenvalues of the Hermitian part (A + A^*)/2.

    Returns:
        (lambda_min, lambda_max)
    """
    A = _as_square(A)
    if A.shape[0] == 0:
        raise DimensionError("sym_part_bounds needs a non-empty matrix")
    herm = 0.5 * (A + A.conj().T)
    w = scipy.linalg.eigvalsh(herm)
    return float(w[0]), float(w[-1])


def spectral_norm(A: np.ndarray) -> float:
    """Largest singular value, sqrt(lambda_max(A^* A))."""
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    gram = A.conj().T @ A
    return float(math.sqrt(max(scipy.linalg.eigvalsh(gram)[-1], 0.0)))


def condition_number(A: np.ndarray) -> float:
    """2-norm condition number; inf for singular matrices."""
    A = _as_square(A)
    if A.shape[0] == 0:
        return 1.0
    s = scipy.linalg.svdvals(A)
    if s[-1] == 0.0:
        return math.inf
    return float(s[0] / s[-1])


def matrix_root(P: np.ndarray, n: int) -> np.ndarray:
    """
    Principal n-th root of a symmetric positive definite matrix.

    Raises:
        ValueError: If n < 1 or P is not positive definite
    """
    if n < 1:
        raise ValueError(f"root order must be >= 1, got {n}")
    P = _as_square(P, "P")
    herm = 0.5 * (P + P.conj().T)
    w, V = scipy.linalg.eigh(herm)
    if w.size and w[0] <= 0.0:
        raise ValueError(f"matrix_root needs a positive definite matrix, min eigenvalue {w[0]:.3e}")
    return (V * w ** (1.0 / n)) @ V.conj().T
