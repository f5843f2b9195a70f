"""
Continuous Transfer Functions for pyphsim

For constant H the resolvent problem lambda x = A x reduces to the
linear ODE  sum_k P_k z^(k) = lambda H^{-1} z  in z = Hx, written as the
first-order system  xi' = B_lambda xi  with xi = (z, z', ..., z^(N-1)).
Imposing u on the general solution and reading y gives y = G(lambda) u.

Solution bases are built from an ordered complex Schur form of B_lambda:
decaying modes are anchored at zeta = 0 and growing modes at zeta = 1, so
no exponential larger than one is ever formed.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional

import numpy as np
import scipy.linalg

from .densekit import condition_number, mat_exp, sym_part_bounds
from .errors import NotPassiveError, UnsupportedFeatureError
from .model import PhsModel
from .port import port_matrices

logger = logging.getLogger(__name__)


def _check_lambda(lam: complex) -> complex:
    lam = complex(lam)
    if not lam.real > 0.0:
        raise ValueError(f"lambda must have positive real part, got {lam}")
    return lam


def _constant_h(model: PhsModel) -> np.ndarray:
    if not model.H.is_constant:
        raise UnsupportedFeatureError(
            "continuous transfer functions need a constant H; "
            "use pyphsim.core.discrete.discrete_io_maps for variable H"
        )
    return model.H.at(0.0)


def assemble_companion(model: PhsModel, lam: complex) -> np.ndarray:
    """
    Block companion matrix B_lambda of size N*d.

    Identity blocks sit on the block super-diagonal; the bottom block row is
    (P_N^{-1}(lambda H^{-1} - P_0), -P_N^{-1} P_1, ..., -P_N^{-1} P_{N-1}).

    Raises:
        ValueError: If Re lambda <= 0
        UnsupportedFeatureError: If H is not constant
    """
    lam = _check_lambda(lam)
    H = _constant_h(model)
    N, d = model.N, model.d
    lead_inv = np.linalg.inv(model.leading)
    B = np.zeros((N * d, N * d), dtype=complex)
    for i in range(N - 1):
        B[i * d:(i + 1) * d, (i + 1) * d:(i + 2) * d] = np.eye(d)
    row = slice((N - 1) * d, N * d)
    B[row, 0:d] = lead_inv @ (lam * np.linalg.inv(H) - model.P[0])
    for k in range(1, N):
        B[row, k * d:(k + 1) * d] = -lead_inv @ model.P[k]
    return B


def propagator(model: PhsModel, lam: complex) -> np.ndarray:
    """E_lambda = exp(B_lambda), mapping xi(0) to xi(1)."""
    return mat_exp(assemble_companion(model, lam))


def trace_basis(model: PhsModel, lam: complex) -> np.ndarray:
    """
    Basis of trace stacks of solutions of the resolvent ODE.

    Returns:
        K of shape (2*N*d, N*d): every solution's trace stack is K c
    """
    B = assemble_companion(model, lam)
    n = B.shape[0]
    T, Z, k = scipy.linalg.schur(B, output="complex", sort=lambda ev: ev.real < 0.0)
    T11, T12, T22 = T[:k, :k], T[:k, k:], T[k:, k:]
    if 0 < k < n:
        X = scipy.linalg.solve_sylvester(T11, -T22, -T12)
    else:
        X = np.zeros((k, n - k), dtype=complex)
    V = Z @ np.block([[np.eye(k), X], [np.zeros((n - k, k)), np.eye(n - k)]])

    decay = mat_exp(T11) if k else np.zeros((0, 0), dtype=complex)
    grow_back = mat_exp(-T22) if k < n else np.zeros((0, 0), dtype=complex)
    at_one = scipy.linalg.block_diag(decay, np.eye(n - k))
    at_zero = scipy.linalg.block_diag(np.eye(k), grow_back)
    logger.debug("trace_basis: lambda=%s, %d decaying / %d growing modes", lam, k, n - k)
    return np.vstack([V @ at_one, V @ at_zero])


@dataclass
class TransferEvaluation:
    """
    G(lambda) with positivity data.

    Attributes:
        lam: Evaluation point, Re lambda > 0
        G: N*d x N*d complex transfer matrix
        min_sym_eig: Smallest eigenvalue of Re G(lambda)
        boundary_system_condition: Condition number of the boundary system
            solved for the inputs (in the scaled solution basis)
    """

    lam: complex
    G: np.ndarray
    min_sym_eig: float
    boundary_system_condition: float

    def to_row(self) -> Dict[str, float]:
        """Flat record: lambda, G entries row-major, positivity data."""
        row: Dict[str, float] = {"lambda_re": self.lam.real, "lambda_im": self.lam.imag}
        n = self.G.shape[0]
        for i in range(n):
            for j in range(n):
                row[f"G_{i + 1}_{j + 1}_re"] = float(self.G[i, j].real)
                row[f"G_{i + 1}_{j + 1}_im"] = float(self.G[i, j].imag)
        row["min_sym_eig"] = self.min_sym_eig
        row["boundary_condition"] = self.boundary_system_condition
        return row

    def __repr__(self) -> str:
        return (
            f"TransferEvaluation(lambda={self.lam}, min_sym_eig={self.min_sym_eig:.6g}, "
            f"cond={self.boundary_system_condition:.3e})"
        )


def transfer_at(model: PhsModel, lam: complex) -> TransferEvaluation:
    """
    Evaluate G(lambda) for a constant-H model.

    Raises:
        ValueError: If Re lambda <= 0
        UnsupportedFeatureError: If H is not constant
        NotPassiveError: If the boundary system for the inputs is singular

    Example:
        >>> ev = transfer_at(unit_wave, 1.0)
        >>> np.round(ev.G.real, 5)
        array([[1.31304, 0.85092],
               [0.85092, 1.31304]])
    """
    lam = _check_lambda(lam)
    K = trace_basis(model, lam)
    W_u, W_y = port_matrices(model)
    boundary = W_u @ K
    cond = condition_number(boundary)
    if not math.isfinite(cond) or cond > 1e14:
        raise NotPassiveError(
            f"boundary system is singular at lambda={lam} (condition {cond:.3e}); "
            "the model is not impedance passive there"
        )
    if cond > 1e10:
        logger.warning("boundary system at lambda=%s is ill-conditioned (%.3e)", lam, cond)
    G = scipy.linalg.solve(boundary.T, (W_y @ K).T).T
    lo, _ = sym_part_bounds(G)
    return TransferEvaluation(lam=lam, G=G, min_sym_eig=lo, boundary_system_condition=cond)


@dataclass
class PositivityScan:
    """Outcome of scan_positivity; min_value is None for an empty grid."""

    evaluations: List[TransferEvaluation] = field(default_factory=list)
    min_value: Optional[float] = None
    flagged: List[complex] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.flagged

    def to_dict(self) -> Dict[str, Any]:
        return {
            "points": len(self.evaluations),
            "min_value": self.min_value,
            "flagged": [str(lam) for lam in self.flagged],
            "passed": self.passed,
        }


def scan_positivity(model: PhsModel, lambda_grid: Iterable[complex]) -> PositivityScan:
    """Minimum of min_sym_eig over a grid in the right half plane; flags points <= 0."""
    scan = PositivityScan()
    for lam in lambda_grid:
        ev = transfer_at(model, lam)
        scan.evaluations.append(ev)
        if ev.min_sym_eig <= 0.0:
            scan.flagged.append(ev.lam)
        if scan.min_value is None or ev.min_sym_eig < scan.min_value:
            scan.min_value = ev.min_sym_eig
    logger.info("positivity scan: %d points, min %s", len(scan.evaluations), scan.min_value)
    return scan
