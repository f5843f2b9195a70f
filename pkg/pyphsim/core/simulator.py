"""
Closed-Loop Simulator for pyphsim

Integrates a DiscreteSystem under monotone boundary feedback, either a
static map -u in phi(y) or a port-form Controller, with the implicit
midpoint rule or backward Euler.

Each step is one resolvent evaluation x - tau (A x + B u) = f. The
boundary inclusion it leaves is small (Nd unknowns, plus n_c for a
controller) and is solved by forward-backward splitting in a diagonal
metric: the linear part is applied explicitly and the monotone part
through its resolvent.

Features:
- solve_port_inclusion: static inclusion at the ports
- ClosedLoop: stepping, energy bookkeeping and run statistics
- contraction_resolve: resolvent for non-constant H by nested splitting
  around the unit-H system
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
import scipy.linalg

from ..blocks.controller import Controller, verify_controller  # noqa: F401  (re-export)
from ..blocks.monotone import MonotoneMap, ZeroMap
from .constants import SolverDefaults
from .densekit import matrix_root, spectral_norm, sym_part_bounds
from .discrete import DiscreteIoMaps, DiscreteSystem, build_discrete, discrete_io_maps
from .errors import DimensionError, NonConvergenceError
from .initial import InitialDatum
from .model import HamiltonianDensity
from .result import EnergyTrace
from .rng import SeedLike

logger = logging.getLogger(__name__)

Feedback = Union[MonotoneMap, Controller]


@dataclass
class PortSolution:
    """
    Solution of the static port inclusion.

    Unpacks as (y, u, x).
    """

    y: np.ndarray
    u: np.ndarray
    x: np.ndarray
    iterations: int = 0
    residual: float = 0.0
    graph_residual: float = 0.0

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter((self.y, self.u, self.x))


@dataclass
class JointSolution:
    """Solution of the plant-controller inclusion at one resolvent."""

    y: np.ndarray
    u: np.ndarray
    x: np.ndarray
    x_c: np.ndarray
    y_c: np.ndarray
    iterations: int = 0
    residual: float = 0.0


@dataclass
class StepRecord:
    """Per-step quantities written to the energy trace."""

    u: np.ndarray
    y: np.ndarray
    y_c: np.ndarray
    iterations: int
    power_residual: float
    diffquot_norm: float


def _forward_backward(
    L: np.ndarray,
    b: np.ndarray,
    P: np.ndarray,
    P_inv: np.ndarray,
    backward: Callable[[float, np.ndarray], np.ndarray],
    z0: np.ndarray,
    alpha: float,
    tol: float,
    max_iter: int,
    label: str
) -> Tuple[np.ndarray, int, float]:
    """
    Solve 0 in L z - b + T(z) with z <- J(z - alpha P^{-1} (L z - b)).

    `backward(alpha, v)` is the resolvent of alpha P^{-1} T. Stops when
    |z_{k+1} - z_k|_P / alpha <= tol * max(1, |b|).
    """
    target = tol * max(1.0, float(np.linalg.norm(b)))
    history: List[float] = []
    z = z0
    for k in range(1, max_iter + 1):
        z_new = backward(alpha, z - alpha * (P_inv @ (L @ z - b)))
        dz = z_new - z
        res = math.sqrt(max(float(dz @ (P @ dz)), 0.0)) / alpha
        history.append(res)
        z = z_new
        if res <= target:
            if k > SolverDefaults.SLOW_FRACTION * max_iter:
                logger.warning("%s: slow convergence, %d of %d iterations", label, k, max_iter)
            return z, k, res
    rho = None
    if len(history) > 10 and history[-11] > 0.0:
        rho = (history[-1] / history[-11]) ** 0.1
    raise NonConvergenceError(
        f"{label}: no convergence in {max_iter} iterations "
        f"(residual {history[-1]:.3e}, target {target:.3e})",
        residual_history=history,
        rho=rho,
    )


def solve_port_inclusion(
    maps: DiscreteIoMaps,
    phi: MonotoneMap,
    f: np.ndarray,
    y0: Optional[np.ndarray] = None,
    tol: float = SolverDefaults.TOL,
    max_iter: int = SolverDefaults.MAX_ITER
) -> PortSolution:
    """
    Solve y = F f + G u, -u in phi(y) and return (y, u, x = Phi f + Psi u).

    With G_inv = G^{-1} the inclusion reads 0 in G_inv (y - F f) + phi(y),
    a strongly monotone problem in y since Re G_inv >= floor > 0.

    Args:
        maps: Resolvent maps at the step's tau
        phi: Monotone feedback of dimension Nd
        f: Right-hand side of the resolvent equation
        y0: Warm start for y
        tol: Relative tolerance of the fixed-point residual
        max_iter: Iteration cap

    Raises:
        DimensionError: If phi does not act on the ports
        NonConvergenceError: If the cap is hit

    Example:
        >>> y, u, x = solve_port_inclusion(maps, Relay(1.0, n=2), x_n)
    """
    n_ports = maps.G.shape[0]
    if phi.n != n_ports:
        raise DimensionError(f"feedback acts on {phi.n} ports, system has {n_ports}")
    Ff = maps.F @ f

    if isinstance(phi, ZeroMap):
        u = np.zeros(n_ports)
        return PortSolution(y=Ff, u=u, x=maps.phi(f))

    D = maps.metric
    b = maps.G_inv @ Ff
    z0 = Ff.copy() if y0 is None else np.asarray(y0, dtype=float)
    y, iterations, residual = _forward_backward(
        maps.G_inv, b, np.diag(D), np.diag(1.0 / D),
        lambda alpha, v: phi.resolve(alpha / D, v),
        z0, maps.step, tol, max_iter, "port inclusion",
    )
    u = maps.G_inv @ (y - Ff)
    x = maps.phi(f) + maps.Psi @ u
    gap = phi.graph_distance(y, -u)
    return PortSolution(y=y, u=u, x=x, iterations=iterations, residual=residual, graph_residual=gap)


@dataclass(eq=False)
class JointOperator:
    """
    Linear part and metric of the plant-controller inclusion.

    Unknowns z = (y, x_c). The inclusion is

        0 in L z - b + (d_c(y), W a_c(x_c))

    with L = [[G_inv, C_c], [-W B_c, W/tau]], b = (G_inv F f, W x_c_prev / tau).
    The skew coupling cancels in the symmetric part, so the metric
    P = diag(D, W/tau) keeps the backward step separable.
    """

    maps: DiscreteIoMaps
    controller: Controller
    L: np.ndarray = field(repr=False)
    P: np.ndarray = field(repr=False)
    P_inv: np.ndarray = field(repr=False)
    step: float = 0.0

    @classmethod
    def build(cls, maps: DiscreteIoMaps, controller: Controller) -> "JointOperator":
        tau = maps.tau
        W = controller.weight
        L = np.block([
            [maps.G_inv, controller.C_c],
            [-W @ controller.B_c, W / tau],
        ])
        D = maps.metric
        P = scipy.linalg.block_diag(np.diag(D), W / tau)
        P_inv = scipy.linalg.block_diag(np.diag(1.0 / D), tau * np.linalg.inv(W))
        half = scipy.linalg.block_diag(
            np.diag(1.0 / np.sqrt(D)), math.sqrt(tau) * np.linalg.inv(matrix_root(W, 2))
        )
        scaled = half @ L @ half
        mu, _ = sym_part_bounds(scaled)
        step = mu / spectral_norm(scaled) ** 2
        logger.debug("joint operator: tau=%.3e, mu=%.3e, step=%.3e", tau, mu, step)
        return cls(maps=maps, controller=controller, L=L, P=P, P_inv=P_inv, step=step)

    def solve(
        self,
        f: np.ndarray,
        xc_prev: np.ndarray,
        z0: Optional[np.ndarray] = None,
        tol: float = SolverDefaults.TOL,
        max_iter: int = SolverDefaults.MAX_ITER
    ) -> JointSolution:
        maps, ctrl = self.maps, self.controller
        m = maps.G.shape[0]
        tau = maps.tau
        D = maps.metric
        Ff = maps.F @ f
        b = np.concatenate([maps.G_inv @ Ff, ctrl.weight @ xc_prev / tau])

        def backward(alpha: float, v: np.ndarray) -> np.ndarray:
            return np.concatenate([
                ctrl.feedthrough.resolve(alpha / D, v[:m]),
                ctrl.dissipation.resolve(alpha * tau, v[m:]),
            ])

        if z0 is None:
            z0 = np.concatenate([Ff, xc_prev])
        z, iterations, residual = _forward_backward(
            self.L, b, self.P, self.P_inv, backward, z0, self.step, tol, max_iter,
            "controller inclusion",
        )
        y, x_c = z[:m], z[m:]
        u = maps.G_inv @ (y - Ff)
        x = maps.phi(f) + maps.Psi @ u
        return JointSolution(
            y=y, u=u, x=x, x_c=x_c, y_c=-u, iterations=iterations, residual=residual
        )


class ClosedLoop:
    """
    Discrete plant closed by static or dynamic monotone feedback.

    Args:
        system: Discretized plant
        feedback: MonotoneMap on the Nd ports, or a Controller
        stepper: "midpoint" (tau = dt/2) or "backward-euler" (tau = dt)
        dt: Time step
        T: Final time, rounded to a whole number of steps
        tol, max_iter: Inner solver settings
        initial: Initial datum used when run() gets no state
        ports: Optional FeedbackPorts carried for the boundary check
        name: Label used in logs and metadata
        metadata: Extra entries copied into every trace

    Example:
        >>> loop = ClosedLoop(sys, Relay(1.0, n=2), dt=1/256, T=2.0)
        >>> trace = loop.run()
        >>> trace.E_total[-1] <= trace.E_total[0]
        True
    """

    STEPPERS = ("midpoint", "backward-euler")

    def __init__(
        self,
        system: DiscreteSystem,
        feedback: Feedback,
        stepper: str = "midpoint",
        dt: float = 1.0 / 256,
        T: float = 1.0,
        tol: float = SolverDefaults.TOL,
        max_iter: int = SolverDefaults.MAX_ITER,
        initial: Optional[InitialDatum] = None,
        ports: Optional[Any] = None,
        name: str = "closed-loop",
        metadata: Optional[Dict[str, Any]] = None
    ):
        if not isinstance(system, DiscreteSystem):
            raise TypeError(f"Expected DiscreteSystem instance, got {type(system)}")
        if not isinstance(feedback, (MonotoneMap, Controller)):
            raise TypeError(f"feedback must be a MonotoneMap or Controller, got {type(feedback)}")
        n_ports = feedback.n if isinstance(feedback, MonotoneMap) else feedback.n_ports
        if n_ports != system.n_ports:
            raise DimensionError(f"feedback acts on {n_ports} ports, system has {system.n_ports}")
        if stepper not in self.STEPPERS:
            raise ValueError(f"stepper must be one of {self.STEPPERS}, got '{stepper}'")
        if not dt > 0.0 or not T > 0.0:
            raise ValueError(f"dt and T must be positive, got dt={dt}, T={T}")
        if tol <= 0.0 or max_iter < 1:
            raise ValueError(f"invalid solver settings tol={tol}, max_iter={max_iter}")

        self.system = system
        self.feedback = feedback
        self.stepper = stepper
        self.dt = float(dt)
        self.n_steps = max(1, int(round(T / dt)))
        self.T = self.n_steps * self.dt
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.initial = initial if initial is not None else InitialDatum()
        self.ports = ports
        self.name = name
        self.metadata = dict(metadata or {})

        self._maps: Optional[DiscreteIoMaps] = None
        self._joint: Optional[JointOperator] = None
        self.stats: Dict[str, Any] = {}

    @property
    def is_dynamic(self) -> bool:
        return isinstance(self.feedback, Controller)

    @property
    def n_c(self) -> int:
        return self.feedback.n_c if self.is_dynamic else 0

    @property
    def tau(self) -> float:
        return 0.5 * self.dt if self.stepper == "midpoint" else self.dt

    @property
    def maps(self) -> DiscreteIoMaps:
        if self._maps is None:
            self._maps = discrete_io_maps(self.system, self.tau)
        return self._maps

    @property
    def joint(self) -> JointOperator:
        if self._joint is None:
            self._joint = JointOperator.build(self.maps, self.feedback)
        return self._joint

    def initial_state(self, seed: SeedLike = None) -> Tuple[np.ndarray, np.ndarray]:
        return self.initial.sample(self.system, self.n_c, seed)

    def controller_energy(self, x_c: np.ndarray) -> float:
        return self.feedback.energy(x_c) if self.is_dynamic else 0.0

    def step(
        self,
        x_n: np.ndarray,
        xc_n: Optional[np.ndarray] = None,
        warm: Optional[np.ndarray] = None
    ) -> Tuple[np.ndarray, np.ndarray, StepRecord, np.ndarray]:
        """
        Advance one step.

        Returns:
            (x_next, xc_next, record, warm) where warm seeds the next
            inner solve
        """
        sys = self.system
        tau, dt = self.tau, self.dt
        m = sys.n_ports
        if self.is_dynamic:
            ctrl: Controller = self.feedback
            xc_n = np.zeros(ctrl.n_c) if xc_n is None else np.asarray(xc_n, dtype=float)
            sol = self.joint.solve(x_n, xc_n, z0=warm, tol=self.tol, max_iter=self.max_iter)
            x_star, xc_star, u, y = sol.x, sol.x_c, sol.u, sol.y
            y_c = sol.y_c
            d_sel = -u - ctrl.C_c @ xc_star
            a_sel = (xc_n - xc_star) / tau + ctrl.B_c @ y
            supply = -(float(d_sel @ y) + float(a_sel @ (ctrl.weight @ xc_star)))
            warm_next = np.concatenate([y, xc_star])
            iterations = sol.iterations
        else:
            xc_n = np.zeros(0)
            sol = solve_port_inclusion(
                self.maps, self.feedback, x_n, y0=warm, tol=self.tol, max_iter=self.max_iter
            )
            x_star, u, y = sol.x, sol.u, sol.y
            xc_star = np.zeros(0)
            y_c = np.zeros(m)
            supply = float(u @ y)
            warm_next = y
            iterations = sol.iterations

        if self.stepper == "midpoint":
            x_next = 2.0 * x_star - x_n
            xc_next = 2.0 * xc_star - xc_n
        else:
            x_next = x_star
            xc_next = xc_star

        dx = x_next - x_n
        dxc = xc_next - xc_n
        dE = (
            sys.energy(x_next) - sys.energy(x_n)
            + self.controller_energy(xc_next) - self.controller_energy(xc_n)
        )
        jump = sys.energy(dx) + self.controller_energy(dxc)
        numerical = jump if self.stepper == "backward-euler" else 0.0
        residual = abs((dE + numerical) / dt - sys.internal_power(x_star) - supply)
        diffquot = math.sqrt(max(2.0 * jump, 0.0)) / dt

        record = StepRecord(
            u=u, y=y, y_c=y_c, iterations=iterations,
            power_residual=residual, diffquot_norm=diffquot,
        )
        return x_next, xc_next, record, warm_next

    def run(
        self,
        x0: Optional[np.ndarray] = None,
        xc0: Optional[np.ndarray] = None,
        seed: SeedLike = None,
        record_states: bool = False
    ) -> EnergyTrace:
        """
        Integrate from (x0, xc0) over n_steps steps.

        Args:
            x0: Flat or nodal plant state; sampled from `initial` if None
            xc0: Controller state; zeros (or sampled) if None
            seed: Seed for sampled initial data
            record_states: Keep every state in the trace

        Raises:
            NonConvergenceError: If an inner solve hits its cap
        """
        sys = self.system
        if x0 is None:
            x0, sampled_c = self.initial_state(seed)
            xc0 = sampled_c if xc0 is None else xc0
        x = sys.flatten(x0)
        xc = np.zeros(self.n_c) if xc0 is None else np.asarray(xc0, dtype=float).reshape(-1)
        if xc.size != self.n_c:
            raise DimensionError(f"controller state must have length {self.n_c}, got {xc.size}")

        n_t = self.n_steps + 1
        m = sys.n_ports
        times = self.dt * np.arange(n_t)
        E_state = np.zeros(n_t)
        E_ctrl = np.zeros(n_t)
        u_hist = np.zeros((n_t, m))
        y_hist = np.zeros((n_t, m))
        yc_hist = np.zeros((n_t, m))
        residual = np.zeros(n_t)
        diffquot = np.zeros(n_t)
        iterations = np.zeros(n_t, dtype=int)
        states = np.zeros((n_t, sys.size)) if record_states else None
        ctrl_states = np.zeros((n_t, self.n_c)) if record_states else None

        E_state[0] = sys.energy(x)
        E_ctrl[0] = self.controller_energy(xc)
        u_hist[0], y_hist[0] = sys.ports(x)
        if self.is_dynamic:
            yc_hist[0] = self.feedback.output(xc, y_hist[0])
        if record_states:
            states[0] = x
            ctrl_states[0] = xc

        logger.info(
            "running '%s': %d steps, dt=%.4g, stepper=%s, %s feedback",
            self.name, self.n_steps, self.dt, self.stepper,
            "dynamic" if self.is_dynamic else "static",
        )
        warm = None
        for n in range(1, n_t):
            try:
                x, xc, rec, warm = self.step(x, xc, warm)
            except NonConvergenceError as e:
                logger.error("'%s' step %d at t=%.4g: %s", self.name, n, times[n], e)
                raise
            E_state[n] = sys.energy(x)
            E_ctrl[n] = self.controller_energy(xc)
            u_hist[n], y_hist[n], yc_hist[n] = rec.u, rec.y, rec.y_c
            residual[n] = rec.power_residual
            diffquot[n] = rec.diffquot_norm
            iterations[n] = rec.iterations
            if record_states:
                states[n] = x
                ctrl_states[n] = xc

        E_total = E_state + E_ctrl
        growth = np.diff(E_total) > 1e-12 * max(1.0, E_total[0])
        steps_taken = iterations[1:]
        self.stats = {
            "steps": self.n_steps,
            "iterations_total": int(steps_taken.sum()),
            "iterations_max": int(steps_taken.max()),
            "iterations_mean": float(steps_taken.mean()),
            "max_power_residual": float(residual.max()),
            "energy_increase_steps": int(growth.sum()),
        }
        if self.stats["energy_increase_steps"]:
            logger.warning(
                "'%s': energy increased on %d steps", self.name, self.stats["energy_increase_steps"]
            )
        logger.info(
            "'%s' done: E %.6g -> %.6g, %d inner iterations, max power residual %.2e",
            self.name, E_total[0], E_total[-1], self.stats["iterations_total"],
            self.stats["max_power_residual"],
        )

        metadata = {
            "name": self.name,
            "stepper": self.stepper,
            "dt": self.dt,
            "T": self.T,
            "n_cells": sys.n_cells,
            "model": sys.model.name,
            "feedback": self.feedback.describe(),
            "solver": dict(self.stats),
        }
        metadata.update(self.metadata)
        return EnergyTrace(
            times=times, E_state=E_state, E_controller=E_ctrl, u=u_hist, y=y_hist, y_c=yc_hist,
            power_residual=residual, diffquot_norm=diffquot, iterations=iterations,
            states=states, controller_states=ctrl_states, metadata=metadata,
        )

    def __repr__(self) -> str:
        return (
            f"ClosedLoop(name='{self.name}', system={self.system!r}, "
            f"feedback={self.feedback!r}, stepper='{self.stepper}', "
            f"dt={self.dt:.4g}, steps={self.n_steps})"
        )


@dataclass
class ContractionSolution:
    """
    Result of contraction_resolve.

    Attributes:
        x: Resolvent state
        iterations: Outer iterations at the top level
        rho: max_j |Q_j - I| |Q_j^{-1}|, the per-level contraction factor
        order: Number of nested levels n with H = Q^n
    """

    x: np.ndarray
    iterations: int
    rho: float
    order: int


def contraction_resolve(
    system: DiscreteSystem,
    phi: MonotoneMap,
    f: np.ndarray,
    tau: float = 1.0,
    tol: float = SolverDefaults.TOL,
    max_iter: int = SolverDefaults.MAX_ITER,
    max_order: int = 64
) -> ContractionSolution:
    """
    Closed-loop resolvent for non-constant H through the unit-H system.

    With A(H) = A(I) Hbig and C(H) = C(I) Hbig, write Hbig = Q^n with
    |Q_j - I| < 1/2 at every node. Level k solves
    (I - tau A(I) Q^k) x = g under the feedback by iterating

        x <- Q^{-1} R_{k-1}(g + (Q - I) x)

    where R_0 is the closed-loop resolvent of the unit-H system.

    Raises:
        NonConvergenceError: If no order up to max_order brings Q near I,
            or a level hits its cap
    """
    d = system.model.d
    f = system.flatten(f)
    ident = np.eye(d)
    deviation = max(spectral_norm(Hj - ident) for Hj in system.H_nodes)

    unit = build_discrete(
        system.model.with_hamiltonian(HamiltonianDensity.constant(ident)), system.n_cells,
        dissipation=system.dissipation,
    )
    unit_maps = discrete_io_maps(unit, tau)
    warm: Dict[str, Optional[np.ndarray]] = {"y": None}

    def base(g: np.ndarray) -> np.ndarray:
        sol = solve_port_inclusion(unit_maps, phi, g, y0=warm["y"], tol=tol, max_iter=max_iter)
        warm["y"] = sol.y
        return sol.x

    if deviation <= SolverDefaults.STRUCTURE_TOL:
        return ContractionSolution(x=base(f), iterations=0, rho=0.0, order=0)

    order = 1
    while True:
        roots = [matrix_root(Hj, order) for Hj in system.H_nodes]
        if max(spectral_norm(Qj - ident) for Qj in roots) < 0.5:
            break
        order += 1
        if order > max_order:
            raise NonConvergenceError(
                f"H is too far from I: no root order <= {max_order} is close enough"
            )
    rho = max(spectral_norm(Qj - ident) * spectral_norm(np.linalg.inv(Qj)) for Qj in roots)
    Q = scipy.linalg.block_diag(*roots)
    Q_inv = scipy.linalg.block_diag(*[np.linalg.inv(Qj) for Qj in roots])
    shift = Q - np.eye(Q.shape[0])
    logger.debug("contraction resolve: order %d, rho %.3f", order, rho)

    def level(k: int, g: np.ndarray, x: np.ndarray) -> Tuple[np.ndarray, int]:
        if k == 0:
            return base(g), 0
        target = tol * max(1.0, float(np.linalg.norm(g)))
        history: List[float] = []
        for it in range(1, max_iter + 1):
            inner, _ = level(k - 1, g + shift @ x, Q @ x)
            x_new = Q_inv @ inner
            change = float(np.linalg.norm(x_new - x))
            history.append(change)
            x = x_new
            if change <= target:
                return x, it
        raise NonConvergenceError(
            f"contraction level {k}: no convergence in {max_iter} iterations",
            residual_history=history,
            rho=rho,
        )

    x, iterations = level(order, f, f.copy())
    return ContractionSolution(x=x, iterations=iterations, rho=rho, order=order)
