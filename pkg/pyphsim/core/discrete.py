"""
Structure-Preserving Discretization for pyphsim

Second-order summation-by-parts (SBP) discretization of a PhsModel on a
uniform grid of [0, 1], with boundary ports entering through a
simultaneous-approximation-term (SAT) penalty.

Notation (node-major state layout, entry j*d + i is component i at node j):
    W      trapezoid weights (1/2, 1, ..., 1, 1/2) * h
    D1     SBP first derivative: central inside, one-sided boundary rows
    M      energy matrix blockdiag(w_j H_j), E = 1/2 x^T M x
    T      trace rows: ((Hx)_n, (D Hx)_n, (Hx)_0, (D Hx)_0)
    A_free sum_k P_k D^k (H x) without boundary conditions
    K      narrow-stencil dissipation on scalar grid functions
    A      A_free - M^{-1} T^T W_y^T W_u T - sigma (W^{-1} K (x) I) Hbig
    B      M^{-1} T^T W_y^T                     (input)
    C      W_y T                                (output)

With this penalty B is the M-adjoint of C, so for every state x and
input u the energy balance x^T M (A x + B u) = x^T M A x + <u, C x> holds
exactly, and x^T M A x = Re <P_0 H x, H x>_W - sigma (Hx)^T (K (x) I) Hx <= 0.
sigma = 0 keeps the lossless central scheme.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from .constants import SolverDefaults
from .densekit import lu_checked, spectral_norm, sym_part_bounds
from .errors import (
    DimensionError,
    FactorizationError,
    GridError,
    NotPassiveError,
    SingularMatrixError,
)
from .model import PhsModel
from .port import port_matrices
from .rng import make_rng

logger = logging.getLogger(__name__)


def sbp_first_derivative(n_cells: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    SBP pair (D1, w) on n_cells uniform cells of [0, 1].

    Returns:
        D1 of shape (n+1, n+1) and weights w of shape (n+1,)
    """
    n = int(n_cells)
    h = 1.0 / n
    D1 = np.zeros((n + 1, n + 1))
    idx = np.arange(1, n)
    D1[idx, idx - 1] = -0.5 / h
    D1[idx, idx + 1] = 0.5 / h
    D1[0, 0], D1[0, 1] = -1.0 / h, 1.0 / h
    D1[n, n - 1], D1[n, n] = -1.0 / h, 1.0 / h
    w = np.full(n + 1, h)
    w[0] = w[-1] = 0.5 * h
    return D1, w


def sbp_dissipation(n_cells: int) -> np.ndarray:
    """
    Narrow-stencil artificial dissipation K on scalar grid functions.

    K = Ds^T diag(w_int) Ds / h with Ds the (1, -2, 1) stencil on the
    interior nodes, so K is symmetric positive semidefinite, vanishes on
    linear grid functions and W^{-1} K ~ h^3 d^4/dzeta^4 inside. Modes at
    the grid scale, which central differences leave undamped, are damped
    at a rate of order 1/h.
    """
    n = int(n_cells)
    h = 1.0 / n
    Ds = np.zeros((n - 1, n + 1))
    idx = np.arange(n - 1)
    Ds[idx, idx] = 1.0
    Ds[idx, idx + 1] = -2.0
    Ds[idx, idx + 2] = 1.0
    w_int = np.full(n - 1, h)
    return Ds.T @ (w_int[:, None] * Ds) / h


def sbp_residual(D1: np.ndarray, w: np.ndarray, trials: int = 8, seed: int = 0) -> float:
    """Max over random a, b of |<D1 a, b>_w + <a, D1 b>_w - (a_n b_n - a_0 b_0)|, relative."""
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(trials):
        a, b = rng.standard_normal((2, w.size))
        lhs = np.dot(w * (D1 @ a), b) + np.dot(w * a, D1 @ b)
        rhs = a[-1] * b[-1] - a[0] * b[0]
        scale = max(1.0, float(np.linalg.norm(a) * np.linalg.norm(b)))
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


@dataclass(eq=False)
class DiscreteSystem:
    """
    Assembled SBP discretization of a PhsModel.

    Attributes:
        model: The continuous model
        n_cells: Number of cells
        nodes, weights: Grid nodes j/n and trapezoid weights
        D1: SBP derivative on scalar grid functions
        H_nodes: H at the nodes, shape (n+1, d, d)
        M: Energy matrix
        A_free, A: Free and penalized generators
        T: Trace rows
        W_u, W_y: Port maps on traces
        B, C: Input and output operators
        dissipation: Artificial dissipation coefficient sigma
        A_visc: The dissipation part of A (None when sigma = 0)
    """

    model: PhsModel
    n_cells: int
    nodes: np.ndarray
    weights: np.ndarray
    D1: np.ndarray
    H_nodes: np.ndarray
    M: np.ndarray
    A_free: np.ndarray
    A: np.ndarray
    T: np.ndarray
    W_u: np.ndarray
    W_y: np.ndarray
    B: np.ndarray
    C: np.ndarray
    sbp_error: float = 0.0
    dissipation: float = 0.0
    A_visc: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def size(self) -> int:
        return self.A.shape[0]

    @property
    def n_ports(self) -> int:
        return self.model.n_ports

    def nodal(self, x: np.ndarray) -> np.ndarray:
        """Reshape a flat state to (n+1, d)."""
        return np.asarray(x).reshape(self.n_cells + 1, self.model.d)

    def flatten(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape == (self.size,):
            return X.copy()
        if X.shape != (self.n_cells + 1, self.model.d):
            raise DimensionError(
                f"state must have shape ({self.n_cells + 1}, {self.model.d}) or "
                f"({self.size},), got {X.shape}"
            )
        return X.reshape(-1).copy()

    def inner(self, x: np.ndarray, x2: np.ndarray) -> float:
        """Energy inner product <x, x2>_h = x^T M x2."""
        return float(x @ (self.M @ x2))

    def norm(self, x: np.ndarray) -> float:
        return float(np.sqrt(max(self.inner(x, x), 0.0)))

    def energy(self, x: np.ndarray) -> float:
        """E = 1/2 <x, x>_h."""
        return 0.5 * self.inner(x, x)

    def traces(self, x: np.ndarray) -> np.ndarray:
        return self.T @ x

    def ports(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(u, y) read from the boundary traces of x."""
        t = self.T @ x
        return self.W_u @ t, self.W_y @ t

    def internal_power(self, x: np.ndarray) -> float:
        """<A x, x>_h of the penalized generator (<= 0)."""
        return float(x @ (self.M @ (self.A @ x)))

    def artificial_power(self, x: np.ndarray) -> float:
        """<A_visc x, x>_h (<= 0, zero without dissipation)."""
        if self.A_visc is None:
            return 0.0
        return float(x @ (self.M @ (self.A_visc @ x)))

    def __repr__(self) -> str:
        return (
            f"DiscreteSystem(model='{self.model.name}', n_cells={self.n_cells}, "
            f"size={self.size}, ports={self.n_ports}, dissipation={self.dissipation:g})"
        )


def build_discrete(model: PhsModel, n_cells: int, dissipation: float = 0.0) -> DiscreteSystem:
    """
    Assemble the SBP/SAT discretization.

    Args:
        model: Validated PhsModel
        n_cells: Number of uniform cells, at least 8*N
        dissipation: Coefficient sigma >= 0 of the artificial dissipation

    Raises:
        GridError: If the grid is too coarse or the SBP identity fails
        ValueError: If dissipation is negative or not finite

    Example:
        >>> sys = build_discrete(wave, 64)
        >>> sys.size
        130
    """
    N, d = model.N, model.d
    if int(n_cells) != n_cells or n_cells < 8 * N:
        raise GridError(f"n_cells must be an integer >= {8 * N} for order {N}, got {n_cells}")
    if not (np.isfinite(dissipation) and dissipation >= 0.0):
        raise ValueError(f"dissipation must be finite and >= 0, got {dissipation}")
    n = int(n_cells)
    D1, w = sbp_first_derivative(n)
    sbp_error = sbp_residual(D1, w)
    if sbp_error > SolverDefaults.SBP_TOL:
        raise GridError(f"SBP identity violated on {n} cells (residual {sbp_error:.3e})")

    nodes = np.linspace(0.0, 1.0, n + 1)
    H_nodes = model.H.at(nodes)
    Hbig = scipy.linalg.block_diag(*H_nodes)
    ident_d = np.eye(d)
    D = np.kron(D1, ident_d)
    M = np.kron(np.diag(w), ident_d) @ Hbig

    A_core = np.zeros((D.shape[0], D.shape[0]), dtype=np.result_type(*model.P, float))
    Dk = np.eye(D.shape[0])
    for k in range(N + 1):
        A_core = A_core + np.kron(np.eye(n + 1), model.P[k]) @ Dk
        Dk = D @ Dk
    A_free = A_core @ Hbig

    def row_at(j: int, derivative: bool) -> np.ndarray:
        sel = np.kron(np.eye(n + 1)[j], ident_d)
        return (sel @ D if derivative else sel) @ Hbig

    rows_1 = [row_at(n, k == 1) for k in range(N)]
    rows_0 = [row_at(0, k == 1) for k in range(N)]
    T = np.vstack(rows_1 + rows_0)

    W_u, W_y = port_matrices(model)
    M_inv_Tt = np.linalg.solve(M, T.T)
    B = M_inv_Tt @ W_y.T
    C = W_y @ T
    A = A_free - B @ (W_u @ T)
    A_visc = None
    if dissipation > 0.0:
        K = sbp_dissipation(n)
        A_visc = -float(dissipation) * np.kron(K / w[:, None], ident_d) @ Hbig
        A = A + A_visc

    system = DiscreteSystem(
        model=model, n_cells=n, nodes=nodes, weights=w, D1=D1, H_nodes=H_nodes, M=M,
        A_free=A_free, A=A, T=T, W_u=W_u, W_y=W_y, B=B, C=C, sbp_error=sbp_error,
        dissipation=float(dissipation), A_visc=A_visc,
    )
    logger.debug("built %r (SBP residual %.2e)", system, sbp_error)
    return system


def discrete_power_balance(sys: "DiscreteSystem", x: np.ndarray) -> Tuple[float, float]:
    """
    Internal versus boundary power of the free generator.

    Returns:
        (Re <A_free x, x>_h, Re <u(x), y(x)>); equal for lossless data
    """
    x = sys.flatten(x)
    lhs = float(np.real(x @ (sys.M @ (sys.A_free @ x))))
    u, y = sys.ports(x)
    return lhs, float(np.real(np.dot(u, y)))


@dataclass(eq=False)
class DiscreteIoMaps:
    """
    Resolvent maps of the penalized system at scale tau.

    The solution of x - tau (A x + B u) = f is x = Phi f + Psi u and its
    output is y = C x = F f + G u.

    Attributes:
        system: The discrete system
        tau: Resolvent scale
        Psi: (size x Nd) input-to-state map
        F: (Nd x size) state-to-output map
        G: (Nd x Nd) input-to-output map, Re G positive definite
        G_inv: Inverse of G
        floor: Smallest eigenvalue of Re G_inv
        min_sym_eig: Smallest eigenvalue of Re G
        metric: Diagonal of Re G_inv, the Jacobi metric of the inner solver
        step: Forward-backward step mu/L^2 of the metric-scaled G_inv
    """

    system: DiscreteSystem
    tau: float
    lu: Tuple[np.ndarray, np.ndarray] = field(repr=False)
    Psi: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    G: np.ndarray = field(repr=False)
    G_inv: np.ndarray = field(repr=False)
    floor: float = 0.0
    min_sym_eig: float = 0.0
    metric: Optional[np.ndarray] = field(default=None, repr=False)
    step: float = 0.0

    def phi(self, f: np.ndarray) -> np.ndarray:
        """Phi f = (I - tau A)^{-1} f."""
        return scipy.linalg.lu_solve(self.lu, f)

    def psi(self, u: np.ndarray) -> np.ndarray:
        return self.Psi @ u

    def state(self, f: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.phi(f) + self.Psi @ u

    def output(self, f: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.F @ f + self.G @ u


def discrete_io_maps(sys: DiscreteSystem, tau: float) -> DiscreteIoMaps:
    """
    Factor I - tau A and form Phi, Psi, F, G.

    Raises:
        ValueError: If tau <= 0
        FactorizationError: If I - tau A is singular
        NotPassiveError: If Re G is not positive definite
    """
    if not tau > 0.0:
        raise ValueError(f"tau must be > 0, got {tau}")
    tau = float(tau)
    try:
        lu = lu_checked(np.eye(sys.size) - tau * sys.A)
    except SingularMatrixError as e:
        raise FactorizationError(
            f"I - tau*A is singular (tau={tau}, n_cells={sys.n_cells}, pivot {e.pivot})"
        ) from e

    Psi = tau * scipy.linalg.lu_solve(lu, sys.B)
    F = scipy.linalg.lu_solve(lu, sys.C.T, trans=1).T
    G = sys.C @ Psi
    lo_G, _ = sym_part_bounds(G)
    if lo_G <= 0.0:
        raise NotPassiveError(
            f"Re G_h is not positive definite (min eigenvalue {lo_G:.3e}, tau={tau})"
        )
    G_inv = np.linalg.inv(G)
    floor, _ = sym_part_bounds(G_inv)
    metric = np.diag(0.5 * (G_inv + G_inv.T)).copy()
    scale = 1.0 / np.sqrt(metric)
    scaled = scale[:, None] * G_inv * scale[None, :]
    mu, _ = sym_part_bounds(scaled)
    step = mu / spectral_norm(scaled) ** 2
    logger.debug(
        "io maps: tau=%.3e, min eig Re G=%.3e, floor=%.3e, scaled step=%.3e",
        tau, lo_G, floor, step,
    )
    return DiscreteIoMaps(
        system=sys, tau=tau, lu=lu, Psi=Psi, F=F, G=G, G_inv=G_inv,
        floor=floor, min_sym_eig=lo_G, metric=metric, step=step,
    )
