"""
Boundary Ports for pyphsim

Maps the boundary trace stack of Hx to boundary flow/effort and to the
input/output port values of a port-Hamiltonian model.

Trace stack ordering, for a model of order N and dimension d:
    t = ((Hx)(1), (Hx)'(1), ..., (Hx)^(N-1)(1), (Hx)(0), ..., (Hx)^(N-1)(0))

Port values:
    (f; e) = R_ext t
    u = W_B (f; e)
    y = W_C (e; f)
"""

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence, Tuple

import numpy as np

from .errors import DimensionError

if TYPE_CHECKING:
    from .model import PhsModel


@dataclass(frozen=True, eq=False)
class PortVector:
    """
    Port values at one boundary trace.

    Attributes:
        f_boundary: Boundary flow (N*d,)
        e_boundary: Boundary effort (N*d,)
        u: Input port value (N*d,)
        y: Output port value (N*d,)
    """

    f_boundary: np.ndarray
    e_boundary: np.ndarray
    u: np.ndarray
    y: np.ndarray

    def supplied_power(self) -> float:
        """Re <u, y>."""
        return float(np.real(np.vdot(self.y, self.u)))

    def __repr__(self) -> str:
        return f"PortVector(u={np.round(self.u, 6)}, y={np.round(self.y, 6)})"


def swap_matrix(n: int) -> np.ndarray:
    """Permutation taking (f; e) to (e; f) for blocks of size n."""
    ident = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, ident], [ident, zero]])


def _transform(N: int, d: int, P: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    dtype = np.result_type(*P, float)
    Q = np.zeros((N * d, N * d), dtype=dtype)
    for i in range(N):
        for j in range(N):
            k = i + j + 1
            if k <= N:
                Q[i * d:(i + 1) * d, j * d:(j + 1) * d] = (-1) ** i * P[k]
    ident = np.eye(N * d)
    R_ext = np.block([[Q, -Q], [ident, ident]]) / np.sqrt(2.0)
    return Q, R_ext


def port_transform(model: "PhsModel") -> Tuple[np.ndarray, np.ndarray]:
    """
    Assemble Q and R_ext for a model.

    Block (i, j) of Q (0-based, d x d blocks) is (-1)^i P_{i+j+1} when
    i + j + 1 <= N and zero otherwise, so Q is self-adjoint.

    Returns:
        (Q, R_ext) with Q of size N*d and R_ext of size 2*N*d
    """
    return _transform(model.N, model.d, model.P)


def wiring_from_traces(
    P: Sequence[np.ndarray], input_rows: np.ndarray, output_rows: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    W_B and W_C for ports given directly on the trace stack.

    With u = input_rows @ t and y = output_rows @ t this returns the maps
    on (f; e) and (e; f): W_B = input_rows R_ext^{-1},
    W_C = output_rows R_ext^{-1} S.

    Raises:
        DimensionError: On inconsistent shapes
        ValueError: If Q is singular (R_ext not invertible)

    Example:
        >>> P1 = np.array([[0.0, 1.0], [1.0, 0.0]])
        >>> W_B, W_C = wiring_from_traces([np.zeros((2, 2)), P1], [[0, 0, 0, -1], [0, 1, 0, 0]],
        ...                               [[0, 0, 1, 0], [1, 0, 0, 0]])
    """
    N = len(P) - 1
    d = np.asarray(P[0]).shape[0]
    n = N * d
    L_u = np.atleast_2d(np.asarray(input_rows, dtype=float))
    L_y = np.atleast_2d(np.asarray(output_rows, dtype=float))
    for name, L in (("input_rows", L_u), ("output_rows", L_y)):
        if L.shape != (n, 2 * n):
            raise DimensionError(f"{name} must be {n} x {2 * n}, got {L.shape}")
    Q, R_ext = _transform(N, d, [np.asarray(Pk) for Pk in P])
    if np.linalg.matrix_rank(Q) < n:
        raise ValueError("Q is singular; ports cannot be read from the trace stack")
    R_inv = np.linalg.inv(R_ext)
    return L_u @ R_inv, L_y @ R_inv @ swap_matrix(n)


def port_matrices(model: "PhsModel") -> Tuple[np.ndarray, np.ndarray]:
    """
    Port maps on the trace stack.

    Returns:
        (W_u, W_y) with u = W_u t and y = W_y t
    """
    _, R_ext = port_transform(model)
    S = swap_matrix(model.n_ports)
    return model.W_B @ R_ext, model.W_C @ S @ R_ext


def extract_ports(model: "PhsModel", trace: np.ndarray) -> PortVector:
    """
    Boundary flow, effort, input and output for a trace stack.

    Args:
        model: The port-Hamiltonian model
        trace: Trace stack of length 2*N*d

    Returns:
        PortVector

    Raises:
        DimensionError: If the trace has the wrong length

    Example:
        >>> ports = extract_ports(wave, np.array([1.0, 0.0, 0.0, 0.0]))
        >>> ports.f_boundary
        array([0.        , 0.70710678])
    """
    trace = np.asarray(trace)
    expected = 2 * model.n_ports
    if trace.shape != (expected,):
        raise DimensionError(f"trace must have length {expected}, got shape {trace.shape}")
    _, R_ext = port_transform(model)
    fe = R_ext @ trace
    n = model.n_ports
    f, e = fe[:n], fe[n:]
    u = model.W_B @ fe
    y = model.W_C @ np.concatenate([e, f])
    return PortVector(f_boundary=f, e_boundary=e, u=u, y=y)
