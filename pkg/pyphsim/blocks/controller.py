"""
Dynamic Boundary Controller for pyphsim

Nonlinear controller in port form, interconnected with the plant by
u_c = y and u = -y_c:

    dx_c/dt in -a_c(x_c) + B_c u_c
    y_c     in  C_c x_c + d_c(u_c)

where a_c (dissipation, the negative of A_c) and d_c (feedthrough) are
monotone maps, C_c = B_c^* is the adjoint of B_c under the controller
inner product <<x, x'>> = x^T W x (so C_c = B_c^T W), and Pi is the
orthogonal projection naming the plant outputs the controller damps.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from ..core.constants import SolverDefaults
from ..core.errors import DimensionError
from ..core.rng import SeedLike, make_rng
from .monotone import LinearMap, MonotoneMap, monotone_from_config

logger = logging.getLogger(__name__)


class Controller:
    """
    Port-form controller (a_c, B_c, C_c, d_c) with projection Pi and weight W.

    Args:
        dissipation: Monotone map a_c on R^{n_c} (dx_c/dt = -a_c(x_c) + ...)
        B_c: Input matrix (n_c x Nd)
        feedthrough: Monotone map d_c on R^{Nd}
        Pi: Orthogonal projection on R^{Nd}, defaults to the identity
        weight: SPD matrix W of the controller inner product, defaults to I
        C_c: Output matrix; must equal B_c^T W when given
        name: Label used in reports

    Raises:
        DimensionError: On inconsistent shapes
        ValueError: If Pi is not an orthogonal projection, W is not SPD,
            C_c is not the adjoint of B_c, or 0 is not in a_c(0) / d_c(0)

    Example:
        >>> ctrl = Controller.linear(A_c=-np.eye(2), B_c=np.eye(2), D_c=np.eye(2))
        >>> ctrl.n_c, ctrl.n_ports
        (2, 2)
    """

    def __init__(
        self,
        dissipation: MonotoneMap,
        B_c: Any,
        feedthrough: MonotoneMap,
        Pi: Optional[Any] = None,
        weight: Optional[Any] = None,
        C_c: Optional[Any] = None,
        name: str = "controller"
    ):
        B_c = np.atleast_2d(np.asarray(B_c, dtype=float))
        n_c, n_ports = B_c.shape
        if dissipation.n != n_c:
            raise DimensionError(
                f"dissipation map must have dimension {n_c} to match B_c, got {dissipation.n}"
            )
        if feedthrough.n != n_ports:
            raise DimensionError(
                f"feedthrough map must have dimension {n_ports} to match B_c, got {feedthrough.n}"
            )

        Pi = np.eye(n_ports) if Pi is None else np.atleast_2d(np.asarray(Pi, dtype=float))
        if Pi.shape != (n_ports, n_ports):
            raise DimensionError(f"Pi must be {n_ports} x {n_ports}, got {Pi.shape}")
        tol = SolverDefaults.STRUCTURE_TOL
        if np.max(np.abs(Pi - Pi.T)) > tol or np.max(np.abs(Pi @ Pi - Pi)) > tol:
            raise ValueError("Pi must be an orthogonal projection (Pi^2 = Pi = Pi^T)")

        W = np.eye(n_c) if weight is None else np.atleast_2d(np.asarray(weight, dtype=float))
        if W.shape != (n_c, n_c):
            raise DimensionError(f"weight must be {n_c} x {n_c}, got {W.shape}")
        if np.max(np.abs(W - W.T)) > tol or np.linalg.eigvalsh(0.5 * (W + W.T))[0] <= 0.0:
            raise ValueError("weight must be symmetric positive definite")

        adjoint = B_c.T @ W
        if C_c is None:
            C_c = adjoint
        else:
            C_c = np.atleast_2d(np.asarray(C_c, dtype=float))
            if C_c.shape != adjoint.shape:
                raise DimensionError(f"C_c must be {adjoint.shape}, got {C_c.shape}")
            if np.max(np.abs(C_c - adjoint)) > tol * max(1.0, float(np.max(np.abs(adjoint)))):
                raise ValueError("C_c must equal the adjoint B_c^T W of B_c")

        if np.any(dissipation.resolve(1.0, np.zeros(n_c)) != 0.0):
            raise ValueError("dissipation map must satisfy 0 in a_c(0)")
        if np.any(feedthrough.resolve(1.0, np.zeros(n_ports)) != 0.0):
            raise ValueError("feedthrough map must satisfy 0 in d_c(0)")

        self.dissipation = dissipation
        self.feedthrough = feedthrough
        self.B_c = B_c
        self.C_c = C_c
        self.Pi = Pi
        self.weight = W
        self.n_c = n_c
        self.n_ports = n_ports
        self.name = name

    @classmethod
    def linear(
        cls,
        A_c: Any,
        B_c: Any,
        D_c: Any,
        Pi: Optional[Any] = None,
        weight: Optional[Any] = None,
        name: str = "controller"
    ) -> "Controller":
        """Controller with dx_c/dt = A_c x_c + B_c u_c and y_c = C_c x_c + D_c u_c."""
        A_c = np.atleast_2d(np.asarray(A_c, dtype=float))
        feed = D_c if isinstance(D_c, MonotoneMap) else LinearMap(D_c)
        return cls(LinearMap(-A_c), B_c, feed, Pi=Pi, weight=weight, name=name)

    @classmethod
    def from_config(cls, obj: Dict[str, Any]) -> "Controller":
        """
        Build from config.

        Keys: "A_c" (matrix, read as the linear A_c) or "dissipation" (map
        config), "B_c", "D_c" (matrix or map config), optional "Pi",
        "weight", "C_c".
        """
        if "A_c" in obj:
            A_c = np.atleast_2d(np.asarray(obj["A_c"], dtype=float))
            dissipation: MonotoneMap = LinearMap(-A_c)
        elif "dissipation" in obj:
            dissipation = monotone_from_config(obj["dissipation"])
        else:
            raise ValueError("controller config needs 'A_c' or 'dissipation'")
        return cls(
            dissipation,
            obj["B_c"],
            monotone_from_config(obj.get("D_c", {"kind": "zero", "n": len(obj["B_c"][0])})),
            Pi=obj.get("Pi"),
            weight=obj.get("weight"),
            C_c=obj.get("C_c"),
            name=str(obj.get("name", "controller")),
        )

    def energy(self, x_c: np.ndarray) -> float:
        """1/2 <<x_c, x_c>>."""
        return 0.5 * float(x_c @ (self.weight @ x_c))

    def norm(self, x_c: np.ndarray) -> float:
        return math.sqrt(max(2.0 * self.energy(x_c), 0.0))

    def output(self, x_c: np.ndarray, u_c: np.ndarray) -> np.ndarray:
        """y_c = C_c x_c + d_c^0(u_c) (minimal section of the feedthrough)."""
        return self.C_c @ x_c + self.feedthrough.minimal_section(u_c)

    def describe(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "n_c": self.n_c,
            "dissipation": self.dissipation.describe(),
            "feedthrough": self.feedthrough.describe(),
            "B_c": self.B_c.tolist(),
            "Pi": self.Pi.tolist(),
            "weight": self.weight.tolist(),
        }

    def __repr__(self) -> str:
        return (
            f"Controller(name='{self.name}', n_c={self.n_c}, ports={self.n_ports}, "
            f"dissipation={self.dissipation!r}, feedthrough={self.feedthrough!r})"
        )


def create_collocated_controller(
    n_ports: int,
    gain: float = 1.0,
    name: str = "collocated"
) -> Controller:
    """
    Convenience function for the collocated controller A_c = -I, B_c = I, D_c = gain*I, Pi = I.

    Example:
        >>> ctrl = create_collocated_controller(4)
    """
    ident = np.eye(n_ports)
    return Controller.linear(A_c=-ident, B_c=ident, D_c=gain * ident, name=name)


@dataclass
class ControllerReport:
    """
    Estimated constants of the controller hypotheses.

    All values are sample estimates, not certificates.

    Attributes:
        dissipation_ok, rho: Incremental dissipation with margin rho > 0
        output_bound_ok, c_prime: |y_c|^2 <= c'(|x_c|^2 + |Pi u_c|^2)
        decay_ok, delta, c, t0: |x_c(t0)|^2 <= (1-delta)|x_c(0)|^2 + c |Pi u_c|^2_{L2}
        witness: First violating sample, if any
    """

    dissipation_ok: bool
    rho: float
    output_bound_ok: bool
    c_prime: float
    decay_ok: bool
    delta: float
    c: float
    t0: float
    witness: Optional[Dict[str, Any]] = None

    @property
    def passed(self) -> bool:
        return self.dissipation_ok and self.output_bound_ok and self.decay_ok

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "estimates": True,
            "dissipation_ok": self.dissipation_ok,
            "rho": self.rho,
            "output_bound_ok": self.output_bound_ok,
            "c_prime": self.c_prime,
            "decay_ok": self.decay_ok,
            "delta": self.delta,
            "c": self.c,
            "t0": self.t0,
            "witness": self.witness,
        }


_C_PRIME_LIMIT = 1e6


def _graph_point(phi: MonotoneMap, rng: np.random.Generator, scale: float):
    v = scale * rng.standard_normal(phi.n)
    alpha = 10.0 ** rng.uniform(-1.0, 1.0)
    w = phi.resolve(alpha, v)
    return w, (v - w) / alpha


def incremental_dissipation(
    points: Sequence[Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]],
    W: np.ndarray,
    Pi: np.ndarray
) -> Tuple[float, bool]:
    """
    Smallest ratio <<da, dx>> + <dd, du> over |dx|_W^2 + |Pi du|^2 across all pairs.

    Each point is (x, a, u, d) with a in a_c(x) and d in d_c(u). Pairs with
    a zero denominator only need a nonnegative pairing.

    Returns:
        (rho, ok); rho is 0 when no pair has a positive denominator
    """
    X, A, U, D = (np.array(column, dtype=float) for column in zip(*points))
    dX = X[:, None, :] - X[None, :, :]
    dA = A[:, None, :] - A[None, :, :]
    dU = U[:, None, :] - U[None, :, :]
    dD = D[:, None, :] - D[None, :, :]
    pairing = np.einsum("ijk,kl,ijl->ij", dA, W, dX) + np.sum(dD * dU, axis=2)
    denom = np.einsum("ijk,kl,ijl->ij", dX, W, dX) + np.sum((dU @ Pi.T) ** 2, axis=2)
    distinct = ~np.eye(len(points), dtype=bool)
    flat = distinct & (denom <= 1e-300)
    ok = not np.any(pairing[flat] < -1e-12)
    valid = distinct & (denom > 1e-300)
    rho = float(np.min(pairing[valid] / denom[valid])) if np.any(valid) else 0.0
    return rho, ok


def _simulate_alone(ctrl: Controller, x0: np.ndarray, inputs: np.ndarray, dt: float) -> np.ndarray:
    x = x0.copy()
    for u in inputs:
        x = ctrl.dissipation.resolve(dt, x + dt * (ctrl.B_c @ u))
    return x


def verify_controller(
    ctrl: Controller,
    trials: int = 128,
    horizon: float = 1.0,
    seed: SeedLike = None,
    steps: int = 200
) -> ControllerReport:
    """
    Estimate the dissipation, output-bound and decay constants of a controller.

    (i) graph points of (a_c, d_c) are sampled through resolvents and the
        incremental pairing <<da, dx>> + <dd, du> >= rho (|dx|^2 + |Pi du|^2)
        over all pairs of samples (incremental_dissipation)
        gives the estimate rho; rho must be positive.
    (ii) c' = max |y_c|^2 / (|x_c|^2 + |Pi u_c|^2) over the samples plus
        inputs with x_c = 0 and u_c in ker Pi; a nonzero output on a zero
        denominator, or c' > 1e6, fails.
    (iii) the controller alone is integrated by backward Euler over
        [0, horizon]: zero-input runs give delta, runs with random bounded
        inputs give c for the margin delta/2.
    """
    if trials < 2:
        raise ValueError(f"trials must be >= 2, got {trials}")
    if not horizon > 0.0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    rng = make_rng(seed)
    W, Pi = ctrl.weight, ctrl.Pi
    witness: Optional[Dict[str, Any]] = None

    # (i) incremental dissipation
    zero_c, zero_p = np.zeros(ctrl.n_c), np.zeros(ctrl.n_ports)
    points = [(zero_c, zero_c, zero_p, zero_p)]
    for _ in range(trials):
        scale = 10.0 ** rng.uniform(-2.0, 2.0)
        x, a = _graph_point(ctrl.dissipation, rng, scale)
        u, dsel = _graph_point(ctrl.feedthrough, rng, scale)
        points.append((x, a, u, dsel))
    rho, dissipation_ok = incremental_dissipation(points, W, Pi)
    if rho <= 1e-12:
        dissipation_ok = False
        witness = witness or {"item": "dissipation", "rho": rho}

    # (ii) output bound
    inputs = [(x, u, dsel) for x, _, u, dsel in points[1:]]
    kernel = np.eye(ctrl.n_ports) - Pi
    for _ in range(8):
        v = kernel @ rng.standard_normal(ctrl.n_ports)
        if np.linalg.norm(v) > 1e-8:
            inputs.append((np.zeros(ctrl.n_c), v, ctrl.feedthrough.minimal_section(v)))
    c_prime = 0.0
    output_bound_ok = True
    for x, u, dsel in inputs:
        y_c = ctrl.C_c @ x + dsel
        num = float(y_c @ y_c)
        denom = float(x @ (W @ x) + (Pi @ u) @ (Pi @ u))
        if denom <= 1e-14 * max(1.0, float(u @ u)):
            if num > 1e-20:
                output_bound_ok = False
                witness = witness or {
                    "item": "output_bound", "u_c": u.tolist(), "y_c": y_c.tolist()
                }
            continue
        c_prime = max(c_prime, num / denom)
    if c_prime > _C_PRIME_LIMIT:
        output_bound_ok = False
        witness = witness or {"item": "output_bound", "c_prime": c_prime}

    # (iii) decay of the controller alone
    dt = horizon / steps
    worst_ratio = 0.0
    for _ in range(max(4, trials // 8)):
        x0 = rng.standard_normal(ctrl.n_c)
        x_end = _simulate_alone(ctrl, x0, np.zeros((steps, ctrl.n_ports)), dt)
        worst_ratio = max(worst_ratio, (x_end @ (W @ x_end)) / (x0 @ (W @ x0)))
    delta = 1.0 - worst_ratio
    decay_ok = delta > 1e-12
    c = 0.0
    if decay_ok:
        for _ in range(max(4, trials // 8)):
            x0 = rng.standard_normal(ctrl.n_c)
            inputs = rng.uniform(-1.0, 1.0, size=(steps, ctrl.n_ports))
            x_end = _simulate_alone(ctrl, x0, inputs, dt)
            excess = float(x_end @ (W @ x_end) - (1.0 - 0.5 * delta) * (x0 @ (W @ x0)))
            energy_in = dt * float(np.sum((inputs @ Pi.T) ** 2))
            if energy_in <= 1e-14:
                if excess > 1e-12:
                    decay_ok = False
                    witness = witness or {"item": "decay", "excess": excess}
                continue
            c = max(c, excess / energy_in)
    else:
        witness = witness or {"item": "decay", "delta": delta}

    report = ControllerReport(
        dissipation_ok=dissipation_ok, rho=float(rho),
        output_bound_ok=output_bound_ok, c_prime=float(c_prime),
        decay_ok=decay_ok, delta=float(delta), c=float(c), t0=float(horizon),
        witness=witness,
    )
    logger.info(
        "controller %s: rho=%.3g, c'=%.3g, delta=%.3g, c=%.3g (%s)",
        ctrl.name, report.rho, report.c_prime, report.delta, report.c,
        "pass" if report.passed else "fail",
    )
    return report
