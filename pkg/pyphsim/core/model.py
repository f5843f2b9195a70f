"""
Port-Hamiltonian Model for pyphsim

Represents the continuous system

    dx/dt = sum_{k=0}^{N} P_k d^k/dzeta^k (H(zeta) x),   zeta in [0, 1]

with boundary input u = W_B (f; e) and output y = W_C (e; f).

Features:
- HamiltonianDensity: constant, tabulated (piecewise linear) or named
  analytic profiles, with derivative and coercivity audits
- PhsModel: validated, immutable model record
- build_model / create_model: construction with eager structural checks
- sample_passivity: randomized impedance passivity test
"""

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Type, Union

import numpy as np
import scipy.linalg
from numpy.polynomial import legendre
from numpy.polynomial import polynomial as poly

from .constants import SolverDefaults
from .densekit import condition_number
from .errors import (
    CoercivityError,
    DimensionError,
    DissipativityError,
    ModelError,
    SingularBoundaryError,
    SingularLeadingMatrixError,
    SymmetryError,
)
from .port import port_matrices, swap_matrix
from .rng import SeedLike, make_rng

logger = logging.getLogger(__name__)


def _square(M: Any, d: Optional[int], name: str) -> np.ndarray:
    M = np.asarray(M)
    if not np.issubdtype(M.dtype, np.complexfloating):
        M = M.astype(float)
    if M.ndim == 0 and d == 1:
        M = M.reshape(1, 1)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {M.shape}")
    if d is not None and M.shape[0] != d:
        raise DimensionError(f"{name} must be {d} x {d}, got shape {M.shape}")
    return M


class HamiltonianDensity:
    """
    Matrix-valued energy density H(zeta) on [0, 1].

    Kinds:
        constant: a single self-adjoint matrix
        table: samples at increasing nodes covering [0, 1], linear in between
        profile: named analytic profile
            "diagonal-exponential": diag(scale_i * exp(rate_i * zeta))
            "diagonal-affine": diag(start_i + (end_i - start_i) * zeta)

    Example:
        >>> H = HamiltonianDensity.constant(np.diag([1.0, 2.0]))
        >>> H.at(0.5)
        array([[1., 0.],
               [0., 2.]])
        >>> H = HamiltonianDensity.exponential(scale=[1.0, 1.0], rate=[0.0, 2.0])
        >>> H.derivative(0.0)[1, 1]
        2.0
    """

    KINDS = ("constant", "table", "profile")
    PROFILES = ("diagonal-exponential", "diagonal-affine")

    def __init__(
        self,
        kind: str,
        d: int,
        value: Optional[np.ndarray] = None,
        nodes: Optional[np.ndarray] = None,
        values: Optional[np.ndarray] = None,
        profile: Optional[str] = None,
        params: Optional[Dict[str, np.ndarray]] = None
    ):
        if kind not in self.KINDS:
            raise ValueError(f"kind must be one of {self.KINDS}, got '{kind}'")
        self.kind = kind
        self.d = int(d)
        self.value = value
        self.nodes = nodes
        self.values = values
        self.profile = profile
        self.params = params or {}

    # construction -----------------------------------------------------

    @classmethod
    def constant(cls, M: Any) -> "HamiltonianDensity":
        M = np.atleast_2d(np.asarray(M, dtype=float))
        M = _square(M, None, "H")
        return cls("constant", M.shape[0], value=M)

    @classmethod
    def table(cls, nodes: Sequence[float], values: Sequence[Any]) -> "HamiltonianDensity":
        nodes_arr = np.asarray(nodes, dtype=float)
        vals = np.asarray(values, dtype=float)
        if vals.ndim != 3 or vals.shape[1] != vals.shape[2]:
            raise DimensionError(f"table values must have shape (m, d, d), got {vals.shape}")
        if nodes_arr.ndim != 1 or nodes_arr.size != vals.shape[0] or nodes_arr.size < 2:
            raise DimensionError(
                f"table needs at least 2 nodes matching {vals.shape[0]} values, "
                f"got {nodes_arr.size}"
            )
        if np.any(np.diff(nodes_arr) <= 0.0):
            raise ValueError("table nodes must be strictly increasing")
        if abs(nodes_arr[0]) > 1e-12 or abs(nodes_arr[-1] - 1.0) > 1e-12:
            raise ValueError(
                f"table nodes must span [0, 1], got [{nodes_arr[0]}, {nodes_arr[-1]}]"
            )
        return cls("table", vals.shape[1], nodes=nodes_arr, values=vals)

    @classmethod
    def exponential(cls, scale: Sequence[float], rate: Sequence[float]) -> "HamiltonianDensity":
        scale_arr = np.atleast_1d(np.asarray(scale, dtype=float))
        rate_arr = np.atleast_1d(np.asarray(rate, dtype=float))
        if scale_arr.shape != rate_arr.shape or scale_arr.ndim != 1:
            raise DimensionError(
                f"scale and rate must be vectors of equal length, "
                f"got {scale_arr.shape} and {rate_arr.shape}"
            )
        return cls(
            "profile", scale_arr.size, profile="diagonal-exponential",
            params={"scale": scale_arr, "rate": rate_arr},
        )

    @classmethod
    def affine(cls, start: Sequence[float], end: Sequence[float]) -> "HamiltonianDensity":
        start_arr = np.atleast_1d(np.asarray(start, dtype=float))
        end_arr = np.atleast_1d(np.asarray(end, dtype=float))
        if start_arr.shape != end_arr.shape or start_arr.ndim != 1:
            raise DimensionError(
                f"start and end must be vectors of equal length, "
                f"got {start_arr.shape} and {end_arr.shape}"
            )
        return cls(
            "profile", start_arr.size, profile="diagonal-affine",
            params={"start": start_arr, "end": end_arr},
        )

    @classmethod
    def from_config(cls, obj: Any) -> "HamiltonianDensity":
        """
        Build from a config value: a matrix, or a mapping with "kind".

        Mappings:
            {"kind": "constant", "value": M}
            {"kind": "table", "nodes": [...], "values": [M0, M1, ...]}
            {"kind": "profile", "name": "diagonal-exponential", "scale": [...], "rate": [...]}
            {"kind": "profile", "name": "diagonal-affine", "start": [...], "end": [...]}
        """
        if isinstance(obj, HamiltonianDensity):
            return obj
        if not isinstance(obj, Mapping):
            return cls.constant(obj)
        kind = obj.get("kind", "constant")
        if kind == "constant":
            return cls.constant(obj["value"])
        if kind == "table":
            return cls.table(obj["nodes"], obj["values"])
        if kind == "profile":
            name = obj.get("name")
            if name == "diagonal-exponential":
                return cls.exponential(obj["scale"], obj["rate"])
            if name == "diagonal-affine":
                return cls.affine(obj["start"], obj["end"])
            raise ValueError(f"unknown H profile '{name}', expected one of {cls.PROFILES}")
        raise ValueError(f"unknown H kind '{kind}', expected one of {cls.KINDS}")

    # evaluation -------------------------------------------------------

    @property
    def is_constant(self) -> bool:
        if self.kind == "constant":
            return True
        if self.kind == "table":
            return bool(np.all(self.values == self.values[0]))
        if self.profile == "diagonal-exponential":
            return bool(np.all(self.params["rate"] == 0.0))
        return bool(np.all(self.params["start"] == self.params["end"]))

    def _eval(self, zeta: np.ndarray, order: int) -> np.ndarray:
        z = np.atleast_1d(np.asarray(zeta, dtype=float))
        d = self.d
        if self.kind == "constant":
            out = np.broadcast_to(self.value if order == 0 else np.zeros((d, d)), (z.size, d, d))
            return np.array(out)
        if self.kind == "table":
            idx = np.clip(np.searchsorted(self.nodes, z, side="right") - 1, 0, self.nodes.size - 2)
            z0, z1 = self.nodes[idx], self.nodes[idx + 1]
            v0, v1 = self.values[idx], self.values[idx + 1]
            slope = (v1 - v0) / (z1 - z0)[:, None, None]
            if order == 1:
                return slope
            return v0 + slope * (z - z0)[:, None, None]
        if self.profile == "diagonal-exponential":
            scale, rate = self.params["scale"], self.params["rate"]
            diag = scale * np.exp(np.outer(z, rate))
            if order == 1:
                diag = diag * rate
        else:
            start, end = self.params["start"], self.params["end"]
            if order == 1:
                diag = np.broadcast_to(end - start, (z.size, d))
            else:
                diag = start + np.outer(z, end - start)
        out = np.zeros((z.size, d, d))
        out[:, np.arange(d), np.arange(d)] = diag
        return out

    def at(self, zeta: Union[float, np.ndarray]) -> np.ndarray:
        """H(zeta); shape (d, d) for a scalar, (m, d, d) for an array."""
        out = self._eval(zeta, 0)
        return out[0] if np.ndim(zeta) == 0 else out

    def derivative(self, zeta: Union[float, np.ndarray]) -> np.ndarray:
        """H'(zeta) (right derivative at table nodes)."""
        out = self._eval(zeta, 1)
        return out[0] if np.ndim(zeta) == 0 else out

    def inverse_at(self, zeta: Union[float, np.ndarray]) -> np.ndarray:
        """H(zeta)^{-1}."""
        return np.linalg.inv(self.at(zeta))

    # audits -----------------------------------------------------------

    @staticmethod
    def audit_grid(points: int = SolverDefaults.AUDIT_POINTS) -> np.ndarray:
        return np.linspace(0.0, 1.0, points)

    def min_eigenvalue(self, points: int = SolverDefaults.AUDIT_POINTS) -> float:
        H = self.at(self.audit_grid(points))
        sym = 0.5 * (H + np.swapaxes(H, 1, 2))
        return float(np.min(np.linalg.eigvalsh(sym)))

    def max_norm(self, points: int = SolverDefaults.AUDIT_POINTS) -> float:
        H = self.at(self.audit_grid(points))
        return float(np.max(np.linalg.norm(H, ord=2, axis=(1, 2))))

    def lipschitz_constant(self, points: int = SolverDefaults.AUDIT_POINTS) -> float:
        """sup ||H'(zeta)|| over the audit grid (exact for tables)."""
        if self.kind == "table":
            slopes = np.diff(self.values, axis=0) / np.diff(self.nodes)[:, None, None]
            return float(np.max(np.linalg.norm(slopes, ord=2, axis=(1, 2))))
        dH = self.derivative(self.audit_grid(points))
        return float(np.max(np.linalg.norm(dH, ord=2, axis=(1, 2))))

    def problems(self, points: int = SolverDefaults.AUDIT_POINTS) -> List[str]:
        """Violations of self-adjointness and coercivity, empty when valid."""
        found = []
        H = self.at(self.audit_grid(points))
        if not np.all(np.isfinite(H)):
            return ["H has non-finite samples on the audit grid"]
        asym = float(np.max(np.abs(H - np.swapaxes(H, 1, 2))))
        if asym > SolverDefaults.STRUCTURE_TOL * max(1.0, float(np.max(np.abs(H)))):
            found.append(f"H is not self-adjoint (max asymmetry {asym:.3e})")
        m0 = self.min_eigenvalue(points)
        if m0 <= 0.0:
            found.append(f"H is not coercive: min eigenvalue {m0:.3e} on the audit grid")
        return found

    def __repr__(self) -> str:
        detail = self.profile if self.kind == "profile" else self.kind
        return f"HamiltonianDensity({detail}, d={self.d})"


@dataclass(frozen=True, eq=False)
class PhsModel:
    """
    Validated port-Hamiltonian model of order N on [0, 1].

    Attributes:
        N: Order, 1 or 2
        d: State dimension
        P: Tuple (P_0, ..., P_N) of d x d matrices
        H: Energy density
        W_B: Input map (N*d x 2*N*d)
        W_C: Output map (N*d x 2*N*d)
        name: Label used in reports
    """

    N: int
    d: int
    P: Tuple[np.ndarray, ...]
    H: HamiltonianDensity
    W_B: np.ndarray
    W_C: np.ndarray
    name: str = "model"

    @property
    def n_ports(self) -> int:
        return self.N * self.d

    @property
    def leading(self) -> np.ndarray:
        return self.P[self.N]

    def with_hamiltonian(self, H: HamiltonianDensity) -> "PhsModel":
        if H.d != self.d:
            raise DimensionError(f"H must have dimension {self.d}, got {H.d}")
        return dataclasses.replace(self, H=H)

    def __repr__(self) -> str:
        return f"PhsModel(name='{self.name}', N={self.N}, d={self.d}, H={self.H!r})"


def _structure_problems(
    N: int, P: Sequence[np.ndarray], H: HamiltonianDensity, W_B: np.ndarray, W_C: np.ndarray
) -> List[Tuple[Type[ModelError], str]]:
    tol = SolverDefaults.STRUCTURE_TOL
    found: List[Tuple[Type[ModelError], str]] = []

    for k in range(1, N + 1):
        Pk = P[k]
        target = (-1) ** (k + 1) * Pk
        err = float(np.max(np.abs(Pk.conj().T - target)))
        if err > tol * max(1.0, float(np.max(np.abs(Pk)))):
            kind = "self-adjoint" if k % 2 else "skew-adjoint"
            found.append((SymmetryError, f"P_{k} must be {kind} (deviation {err:.3e})"))

    P0 = P[0]
    top = float(scipy.linalg.eigvalsh(0.5 * (P0 + P0.conj().T))[-1])
    if top > tol * max(1.0, float(np.max(np.abs(P0)))):
        found.append(
            (DissipativityError, f"Re P_0 must be negative semidefinite (max eigenvalue {top:.3e})")
        )

    for message in H.problems():
        found.append((CoercivityError, message))

    if condition_number(P[N]) > SolverDefaults.CONDITION_LIMIT:
        found.append((SingularLeadingMatrixError, f"P_{N} is singular"))

    n = N * P0.shape[0]
    stacked = np.vstack([W_B, W_C @ swap_matrix(n)])
    if condition_number(stacked) > SolverDefaults.CONDITION_LIMIT:
        found.append(
            (SingularBoundaryError, "port map [W_B; W_C] is singular on the boundary space")
        )
    return found


def build_model(description: Mapping[str, Any]) -> PhsModel:
    """
    Validate a model description and return a PhsModel.

    Args:
        description: Mapping with keys
            "P": list [P_0, ..., P_N] of d x d matrices (N = len - 1)
            "H": HamiltonianDensity, matrix, or H config mapping
            "W_B", "W_C": N*d x 2*N*d port matrices
            "name": optional label

    Returns:
        Validated PhsModel

    Raises:
        DimensionError: On inconsistent shapes
        ModelError: Subclass for the first violated requirement; the
            diagnostics attribute lists all of them

    Example:
        >>> wave = build_model({
        ...     "P": [np.zeros((2, 2)), [[0, 1], [1, 0]]],
        ...     "H": np.eye(2),
        ...     "W_B": np.array([[1, 0, 0, -1], [1, 0, 0, 1]]) / np.sqrt(2),
        ...     "W_C": np.array([[1, 0, 0, -1], [1, 0, 0, 1]]) / np.sqrt(2),
        ... })
    """
    for key in ("P", "H", "W_B", "W_C"):
        if key not in description:
            raise DimensionError(f"model description is missing '{key}'")

    raw_P = list(description["P"])
    N = len(raw_P) - 1
    if N not in (1, 2):
        raise ModelError(f"order N must be 1 or 2, got {N} (from {len(raw_P)} matrices)")
    P0 = _square(raw_P[0], None, "P_0")
    d = P0.shape[0]
    P = tuple([P0] + [_square(raw_P[k], d, f"P_{k}") for k in range(1, N + 1)])

    H = HamiltonianDensity.from_config(description["H"])
    if H.d != d:
        raise DimensionError(f"H must have dimension {d} to match P, got {H.d}")

    n = N * d
    W_B = np.atleast_2d(np.asarray(description["W_B"], dtype=float))
    W_C = np.atleast_2d(np.asarray(description["W_C"], dtype=float))
    for name, W in (("W_B", W_B), ("W_C", W_C)):
        if W.shape != (n, 2 * n):
            raise DimensionError(f"{name} must be {n} x {2 * n}, got {W.shape}")

    found = _structure_problems(N, P, H, W_B, W_C)
    if found:
        diagnostics = [message for _, message in found]
        for message in diagnostics:
            logger.debug("model rejected: %s", message)
        error_cls, first = found[0]
        raise error_cls(first, diagnostics)

    model = PhsModel(
        N=N, d=d, P=P, H=H, W_B=W_B, W_C=W_C, name=str(description.get("name", "model"))
    )
    logger.debug("built %r", model)
    return model


def create_model(
    P: Sequence[Any],
    H: Any,
    W_B: Any,
    W_C: Any,
    name: str = "model"
) -> PhsModel:
    """
    Convenience function to build a PhsModel from keyword arguments.

    Example:
        >>> model = create_model([0.0, 1.0], 1.0, [[1.0, 0.0]], [[1.0, 0.0]], name="transport")
    """
    return build_model({"P": P, "H": H, "W_B": W_B, "W_C": W_C, "name": name})


@dataclass
class PassivityReport:
    """Outcome of sample_passivity; margin = Re<u,y> - Re<Ax,x>_H."""

    passed: bool
    worst_margin: float
    trials: int
    scale: float

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


_QUAD_NODES, _QUAD_WEIGHTS = legendre.leggauss(16)


def power_balance_terms(model: PhsModel, coeffs: np.ndarray) -> Tuple[float, float]:
    """
    Internal and boundary power for the state with Hx = sum_k coeffs[k] zeta^k.

    Args:
        model: The model
        coeffs: Polynomial coefficients, shape (degree + 1, d)

    Returns:
        (Re <A x, x>_H, Re <u, y>)
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim != 2 or coeffs.shape[1] != model.d:
        raise DimensionError(f"coeffs must have shape (m, {model.d}), got {coeffs.shape}")
    zeta = 0.5 * (_QUAD_NODES + 1.0)
    weights = 0.5 * _QUAD_WEIGHTS

    z = poly.polyval(zeta, coeffs)  # (d, m)
    Az = np.zeros_like(z)
    for k, Pk in enumerate(model.P):
        dk = poly.polyder(coeffs, m=k, axis=0) if k else coeffs
        Az = Az + Pk @ poly.polyval(zeta, dk)
    internal = float(np.real(np.sum(weights * np.sum(Az * np.conj(z), axis=0))))

    pieces_1, pieces_0 = [], []
    for k in range(model.N):
        dk = poly.polyder(coeffs, m=k, axis=0) if k else coeffs
        pieces_1.append(poly.polyval(1.0, dk))
        pieces_0.append(poly.polyval(0.0, dk))
    trace = np.concatenate(pieces_1 + pieces_0)
    W_u, W_y = port_matrices(model)
    boundary = float(np.real(np.vdot(W_y @ trace, W_u @ trace)))
    return internal, boundary


def sample_passivity(model: PhsModel, trials: int = 64, seed: SeedLike = None) -> PassivityReport:
    """
    Randomized impedance passivity check Re<Ax, x>_H <= Re<u, y>.

    Trial states have Hx a random vector polynomial of degree <= 6, so the
    Gauss-Legendre rule integrates the internal power exactly.

    Args:
        model: The model
        trials: Number of random states
        seed: RNG seed

    Returns:
        PassivityReport with the smallest margin seen
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rng = make_rng(seed)
    worst = math.inf
    scale = 1.0
    for _ in range(trials):
        degree = int(rng.integers(0, 7))
        coeffs = rng.standard_normal((degree + 1, model.d))
        internal, boundary = power_balance_terms(model, coeffs)
        scale = max(scale, abs(internal), abs(boundary))
        worst = min(worst, boundary - internal)
    passed = worst >= -1e-8 * scale
    logger.info(
        "passivity sample on %s: %d trials, worst margin %.3e (%s)",
        model.name, trials, worst, "pass" if passed else "fail",
    )
    return PassivityReport(passed=passed, worst_margin=float(worst), trials=trials, scale=scale)
