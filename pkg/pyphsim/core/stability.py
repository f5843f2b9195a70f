"""
Stability Diagnostics for pyphsim

Multipliers, Lyapunov functionals and checkable sufficient conditions for
exponential decay, plus decay-rate fits on energy traces.

Profiles:
    N1  first-order systems, q(x) = <x, eta P_1^{-1} x>
    N2  second-order systems with small lower-order terms
    EB  Euler-Bernoulli block structure (P_2 off-diagonal, P_1 = P_0 = 0)

All sup-norms over zeta are taken on a fixed audit grid.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.stats
from scipy.integrate import cumulative_trapezoid

from .constants import SolverDefaults
from .densekit import spectral_norm
from .discrete import DiscreteSystem
from .errors import ProfileMismatchError, UndefinedFitError
from .model import PhsModel
from .port import port_matrices
from .result import EnergyTrace

logger = logging.getLogger(__name__)

PROFILES = ("N1", "N2", "EB")


def _audit_grid(points: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, points)


@dataclass
class ConditionReport:
    """
    Outcome of a sufficient-condition check.

    For the inequality checks `passed` is the strict lhs < threshold;
    sampled checks (sector, passivity, controller) set it from their own
    report and use lhs as a severity measure.
    """

    name: str
    lhs: float
    threshold: float
    passed: bool
    terms: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        def clean(v: float) -> Any:
            return float(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf")

        return {
            "name": self.name,
            "lhs": clean(self.lhs),
            "threshold": clean(self.threshold),
            "passed": bool(self.passed),
            "terms": {k: clean(v) for k, v in self.terms.items()},
        }


# ============================================================================
# Multipliers
# ============================================================================

@dataclass(frozen=True)
class Multiplier:
    """
    Weight eta(zeta) of a Lyapunov functional.

    Forms:
        exponential: eta = s (exp(lam zeta) - 1), eta(0) = 0, eta' > 0
        linear:      eta = 1 - zeta, eta(1) = 0
    """

    form: str
    s: float = 1.0
    lam: float = 1.0
    alpha: float = 1.0
    beta: float = 0.0
    gamma: float = 0.0
    margin: float = 0.0

    def __call__(self, zeta: Any) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=float)
        if self.form == "linear":
            return 1.0 - zeta
        return self.s * np.expm1(self.lam * zeta)

    def derivative(self, zeta: Any) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=float)
        if self.form == "linear":
            return -np.ones_like(zeta)
        return self.s * self.lam * np.exp(self.lam * zeta)

    def audit(self, points: int = SolverDefaults.AUDIT_POINTS) -> float:
        """min over the grid of alpha eta' - beta eta - gamma."""
        zeta = _audit_grid(points)
        slack = self.alpha * self.derivative(zeta) - self.beta * self(zeta) - self.gamma
        return float(np.min(slack))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "form": self.form, "s": self.s, "lambda": self.lam,
            "alpha": self.alpha, "beta": self.beta, "gamma": self.gamma, "margin": self.margin,
        }


def make_multiplier(
    alpha: float,
    beta: float = 0.0,
    gamma: float = 0.0,
    points: int = SolverDefaults.AUDIT_POINTS
) -> Multiplier:
    """
    Exponential multiplier with alpha eta' - beta eta >= gamma on [0, 1].

    With lam >= 2 beta / alpha the left side is increasing in zeta, so its
    minimum sits at zeta = 0 where it equals s alpha lam; s = gamma/(alpha lam)
    makes that exactly gamma. The grid audit confirms it, doubling lam
    on failure.

    Raises:
        ValueError: If alpha <= 0, or beta or gamma is negative

    Example:
        >>> eta = make_multiplier(1.0, 0.0, 1.0)
        >>> eta.s, eta.lam
        (1.0, 1.0)
    """
    if not alpha > 0.0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if beta < 0.0 or gamma < 0.0:
        raise ValueError(f"beta and gamma must be >= 0, got beta={beta}, gamma={gamma}")
    alpha, beta, gamma = float(alpha), float(beta), float(gamma)
    floor = 1.0 if gamma > 0.0 else 1e-3
    lam = max(2.0 * beta / alpha, floor)
    allowance = -1e-12 * max(1.0, gamma)
    for _ in range(64):
        s = gamma / (alpha * lam) if gamma > 0.0 else 1.0 / lam
        eta = Multiplier("exponential", s=s, lam=lam, alpha=alpha, beta=beta, gamma=gamma)
        margin = eta.audit(points)
        if margin >= allowance:
            logger.debug("multiplier: lam=%.4g, s=%.4g, margin=%.3e", lam, s, margin)
            return Multiplier(
                "exponential", s=s, lam=lam, alpha=alpha, beta=beta, gamma=gamma,
                margin=max(margin, 0.0),
            )
        lam *= 2.0
    raise RuntimeError(f"multiplier audit failed for alpha={alpha}, beta={beta}, gamma={gamma}")


def make_eb_multiplier() -> Multiplier:
    """eta(zeta) = 1 - zeta."""
    return Multiplier("linear", s=1.0, lam=0.0)


def multiplier_for_model(model: PhsModel, points: int = SolverDefaults.AUDIT_POINTS) -> Multiplier:
    """
    First-order multiplier for a model.

    alpha = min eig H^{-1}, beta = sup |(H^{-1})'| + 2 sup |Re(H^{-1} P_1^{-1} P_0)|,
    gamma = 2 sup |H^{-1}|.

    Raises:
        ProfileMismatchError: If N != 1
    """
    if model.N != 1:
        raise ProfileMismatchError(f"first-order multiplier needs N = 1, got N = {model.N}")
    zeta = _audit_grid(points)
    H_inv = model.H.inverse_at(zeta)
    dH = model.H.derivative(zeta)
    P1_inv = np.linalg.inv(model.P[1])
    P0 = model.P[0]
    alpha = min(float(np.linalg.eigvalsh(0.5 * (Hi + Hi.T))[0]) for Hi in H_inv)
    d_inv = max(spectral_norm(Hi @ dHi @ Hi) for Hi, dHi in zip(H_inv, dH))
    coupling = max(spectral_norm(np.real(Hi @ P1_inv @ P0)) for Hi in H_inv)
    gamma = 2.0 * max(spectral_norm(Hi) for Hi in H_inv)
    return make_multiplier(alpha, d_inv + 2.0 * coupling, gamma, points)


# ============================================================================
# Lyapunov functionals
# ============================================================================

def _is_eb_structure(
    model: PhsModel,
    tol: float = SolverDefaults.STRUCTURE_TOL
) -> Tuple[bool, str]:
    if model.N != 2:
        return False, f"needs N = 2, got N = {model.N}"
    d = model.d
    if d % 2:
        return False, f"needs even d, got d = {d}"
    k = d // 2
    P0, P1, P2 = model.P
    if np.max(np.abs(P1)) > tol or np.max(np.abs(P0)) > tol:
        return False, "needs P_1 = P_0 = 0"
    if np.max(np.abs(P2[:k, :k])) > tol or np.max(np.abs(P2[k:, k:])) > tol:
        return False, "P_2 must have zero diagonal blocks"
    if np.max(np.abs(P2[:k, k:] + P2[k:, :k].conj().T)) > tol:
        return False, "P_2 must have the form [[0, -P^T], [P, 0]]"
    H = model.H.at(_audit_grid(64))
    if np.max(np.abs(H[:, :k, k:])) > tol or np.max(np.abs(H[:, k:, :k])) > tol:
        return False, "H must be block diagonal"
    return True, ""


class LyapunovFunctional:
    """
    Quadratic functional q on the discrete state space.

    Attributes:
        system: Discrete system the functional is evaluated on
        profile: "N1", "N2" or "EB"
        eta: Multiplier
        bound: c_hat with |q(x)| <= c_hat |x|_h^2

    Raises:
        ProfileMismatchError: If the profile does not fit the model or eta
    """

    def __init__(self, system: DiscreteSystem, profile: str, eta: Multiplier):
        model = system.model
        if profile not in PROFILES:
            raise ProfileMismatchError(f"profile must be one of {PROFILES}, got '{profile}'")
        tol = 1e-14
        if profile == "N1":
            if model.N != 1:
                raise ProfileMismatchError(f"profile N1 needs N = 1, got N = {model.N}")
            zeta = _audit_grid(SolverDefaults.AUDIT_POINTS)
            if abs(float(eta(0.0))) > tol or np.min(eta.derivative(zeta)) <= 0.0:
                raise ProfileMismatchError("profile N1 needs eta(0) = 0 and eta' > 0")
        elif profile == "N2":
            if model.N != 2:
                raise ProfileMismatchError(f"profile N2 needs N = 2, got N = {model.N}")
        else:
            ok, why = _is_eb_structure(model)
            if not ok:
                raise ProfileMismatchError(f"profile EB: {why}")
            if abs(float(eta(1.0))) > tol:
                raise ProfileMismatchError("profile EB needs eta(1) = 0")

        self.system = system
        self.profile = profile
        self.eta = eta
        self._w_eta = system.weights * eta(system.nodes)
        m0 = min(float(np.linalg.eigvalsh(Hj)[0]) for Hj in system.H_nodes)
        eta_max = float(np.max(np.abs(eta(_audit_grid(SolverDefaults.AUDIT_POINTS)))))

        P = model.P
        if profile == "N1":
            self._K = np.linalg.inv(P[1])
            self.bound = eta_max * spectral_norm(self._K) / m0
        elif profile == "N2":
            self._K = np.linalg.inv(P[2])
            self._P1 = P[1]
            nK = spectral_norm(self._K)
            self.bound = eta_max * (nK + 0.5 * nK**2 * spectral_norm(P[1])) / m0
        else:
            k = model.d // 2
            self._K = np.linalg.inv(P[2][k:, :k])
            self.bound = 0.5 * eta_max * spectral_norm(self._K) / m0

    def _antiderivative(self, X: np.ndarray) -> np.ndarray:
        return cumulative_trapezoid(X, self.system.nodes, axis=0, initial=0.0)

    def value(self, x: np.ndarray) -> float:
        X = self.system.nodal(self.system.flatten(x))
        w = self._w_eta
        if self.profile == "N1":
            q = np.einsum("j,ji,ji->", w, X, X @ self._K.T)
        elif self.profile == "N2":
            Y = self._antiderivative(X) @ self._K.T
            q = np.einsum("j,ji,ji->", w, X, Y) - 0.5 * np.einsum("j,ji,ji->", w, Y, Y @ self._P1.T)
        else:
            k = self.system.model.d // 2
            Y = self._antiderivative(X[:, k:]) @ self._K.T
            q = np.einsum("j,ji,ji->", w, X[:, :k], Y)
        return float(np.real(q))

    __call__ = value

    def __repr__(self) -> str:
        return (
            f"LyapunovFunctional(profile='{self.profile}', eta={self.eta.form}, "
            f"bound={self.bound:.4g})"
        )


def lyapunov_functional(
    system: DiscreteSystem,
    profile: str,
    eta: Multiplier
) -> LyapunovFunctional:
    return LyapunovFunctional(system, profile, eta)


def lyapunov_q(system: DiscreteSystem, profile: str, eta: Multiplier, x: np.ndarray) -> float:
    """q(x) of the profile's functional."""
    return LyapunovFunctional(system, profile, eta).value(x)


@dataclass
class LyapunovSeries:
    """Phi_n = t_n |x_n|_h^2 + q(x_n) along a trace."""

    times: np.ndarray
    values: np.ndarray
    t0: float
    max_increase: float

    def to_dict(self) -> Dict[str, Any]:
        return {"t0": self.t0, "max_increase": self.max_increase, "points": int(self.times.size)}


def descent_time(eta: Multiplier, kappa_tilde: float) -> float:
    """t0 = eta(1) / (2 kappa_tilde); infinite when kappa_tilde = 0."""
    if kappa_tilde <= 0.0:
        return math.inf
    return float(eta(1.0)) / (2.0 * kappa_tilde)


def lyapunov_series(
    system: DiscreteSystem,
    functional: LyapunovFunctional,
    trace: EnergyTrace,
    t0: float = 0.0
) -> LyapunovSeries:
    """
    Evaluate Phi along a trace recorded with record_states=True.

    max_increase is the largest Phi_{n+1} - Phi_n over steps starting at
    t_n >= t0 (-inf when there are none).

    Raises:
        ValueError: If the trace carries no states
    """
    if trace.states is None:
        raise ValueError("trace has no states; run with record_states=True")
    norms = 2.0 * trace.E_state
    q = np.array([functional.value(x) for x in trace.states])
    values = trace.times * norms + q
    steps = np.diff(values)
    late = trace.times[:-1] >= t0
    max_increase = float(np.max(steps[late])) if np.any(late) else -math.inf
    return LyapunovSeries(
        times=trace.times.copy(), values=values, t0=float(t0), max_increase=max_increase
    )


# ============================================================================
# Sufficient conditions
# ============================================================================

def check_order2_condition(
    model: PhsModel,
    points: int = SolverDefaults.AUDIT_POINTS
) -> ConditionReport:
    """
    Smallness of the lower-order terms of a second-order system.

    lhs = sup |(zeta - 1)(H' H^{-1} + P_2^{-1} P_1)|
          + |P_0^* P_2^{-1} + P_2^{-1} P_0 - P_1 P_2^{-1} P_1 P_2^{-1}| / sqrt(2)
          + 1/2 |(P_2^{-1} P_0)^* P_2^{-1} P_0|
    and the check passes when lhs < 2.

    Raises:
        ProfileMismatchError: If N != 2
    """
    if model.N != 2:
        raise ProfileMismatchError(f"order-2 condition needs N = 2, got N = {model.N}")
    P0, P1, P2 = model.P
    K = np.linalg.inv(P2)
    zeta = _audit_grid(points)
    H_inv = model.H.inverse_at(zeta)
    dH = model.H.derivative(zeta)
    KP1 = K @ P1
    term1 = max(
        abs(z - 1.0) * spectral_norm(dHj @ Hij + KP1) for z, dHj, Hij in zip(zeta, dH, H_inv)
    )
    term2 = spectral_norm(P0.conj().T @ K + K @ P0 - P1 @ K @ P1 @ K) / math.sqrt(2.0)
    KP0 = K @ P0
    term3 = 0.5 * spectral_norm(KP0.conj().T @ KP0)
    lhs = term1 + term2 + term3
    report = ConditionReport(
        name="order2", lhs=lhs, threshold=2.0, passed=lhs < 2.0,
        terms={"weighted_log_derivative": term1, "coupling": term2, "damping": term3},
    )
    logger.info("order-2 condition: lhs=%.6g (%s)", lhs, "pass" if report.passed else "fail")
    return report


def check_eb_condition(
    model: PhsModel,
    points: int = SolverDefaults.AUDIT_POINTS
) -> ConditionReport:
    """
    sup |H_1' H_1^{-1}| and sup |H_2' H_2^{-1}| both below 1.

    Raises:
        ProfileMismatchError: If the model lacks the Euler-Bernoulli block structure
    """
    ok, why = _is_eb_structure(model)
    if not ok:
        raise ProfileMismatchError(f"Euler-Bernoulli condition: {why}")
    k = model.d // 2
    zeta = _audit_grid(points)
    H_inv = model.H.inverse_at(zeta)
    dH = model.H.derivative(zeta)
    sup1 = max(spectral_norm(dHj[:k, :k] @ Hij[:k, :k]) for dHj, Hij in zip(dH, H_inv))
    sup2 = max(spectral_norm(dHj[k:, k:] @ Hij[k:, k:]) for dHj, Hij in zip(dH, H_inv))
    lhs = max(sup1, sup2)
    report = ConditionReport(
        name="euler_bernoulli", lhs=lhs, threshold=1.0, passed=lhs < 1.0,
        terms={"H1_log_derivative": sup1, "H2_log_derivative": sup2},
    )
    logger.info("EB condition: lhs=%.6g (%s)", lhs, "pass" if report.passed else "fail")
    return report


@dataclass
class FeedbackPorts:
    """
    Which ports the feedback damps.

    Attributes:
        input_projection: Pi_u, the input components the feedback acts on
        output_projection: Pi, the output components that are damped
    """

    input_projection: Optional[np.ndarray] = None
    output_projection: Optional[np.ndarray] = None

    def projections(self, n_ports: int) -> Tuple[np.ndarray, np.ndarray]:
        ident = np.eye(n_ports)
        Pu, Py = ident, ident
        if self.input_projection is not None:
            Pu = np.asarray(self.input_projection, dtype=float)
        if self.output_projection is not None:
            Py = np.asarray(self.output_projection, dtype=float)
        for name, Pm in (("input_projection", Pu), ("output_projection", Py)):
            if Pm.shape != (n_ports, n_ports):
                raise ValueError(f"{name} must be {n_ports} x {n_ports}, got {Pm.shape}")
        return Pu, Py

    def to_dict(self) -> Dict[str, Any]:
        def listed(P: Optional[np.ndarray]) -> Optional[list]:
            return None if P is None else np.asarray(P).tolist()

        return {
            "input_projection": listed(self.input_projection),
            "output_projection": listed(self.output_projection),
        }


def trace_selection(model: PhsModel, profile: str) -> np.ndarray:
    """
    Rows of the trace stack t = (z(1), z'(1), z(0), z'(0)) bounded by the profile.

    N1: z(1); N2: z(1), z(0), z'(0); EB: z(0), z_1'(0), z_2(1).
    """
    d, N = model.d, model.N
    size = 2 * N * d
    if profile == "N1":
        if N != 1:
            raise ProfileMismatchError(f"profile N1 needs N = 1, got N = {N}")
        rows = list(range(0, d))
    elif profile == "N2":
        if N != 2:
            raise ProfileMismatchError(f"profile N2 needs N = 2, got N = {N}")
        rows = list(range(0, d)) + list(range(2 * d, 4 * d))
    elif profile == "EB":
        ok, why = _is_eb_structure(model)
        if not ok:
            raise ProfileMismatchError(f"profile EB: {why}")
        k = d // 2
        rows = list(range(2 * d, 3 * d)) + list(range(3 * d, 3 * d + k)) + list(range(k, d))
    else:
        raise ProfileMismatchError(f"profile must be one of {PROFILES}, got '{profile}'")
    return np.eye(size)[rows]


def check_boundary_bound(
    model: PhsModel,
    ports: Optional[FeedbackPorts] = None,
    profile: str = "N1"
) -> ConditionReport:
    """
    Smallest c with |K_t t|^2 <= c (|Pi_u u|^2 + |Pi y|^2) on the trace space.

    The port form is singular when the feedback leaves ports undamped;
    c is infinite when its kernel carries a nonzero profile trace.

    Example:
        >>> check_boundary_bound(wave, FeedbackPorts(output_projection=np.diag([0.0, 1.0]))).lhs
        1.0
    """
    ports = ports or FeedbackPorts()
    W_u, W_y = port_matrices(model)
    Pu, Py = ports.projections(model.n_ports)
    Ku = Pu @ W_u
    Ky = Py @ W_y
    port_form = np.real(Ku.conj().T @ Ku + Ky.conj().T @ Ky)
    port_form = 0.5 * (port_form + port_form.T)
    S = trace_selection(model, profile)

    w, V = scipy.linalg.eigh(port_form)
    cut = 1e-10 * max(float(w[-1]), 1.0)
    kernel = V[:, w <= cut]
    rng_V = V[:, w > cut]
    overlap = spectral_norm(S @ kernel) if kernel.size else 0.0
    if overlap > 1e-8:
        c = math.inf
    elif rng_V.size == 0:
        c = 0.0
    else:
        scale = 1.0 / np.sqrt(w[w > cut])
        SV = S @ rng_V * scale[None, :]
        c = float(np.linalg.eigvalsh(SV.T @ SV)[-1])
    report = ConditionReport(
        name=f"boundary_bound[{profile}]", lhs=c, threshold=math.inf, passed=math.isfinite(c),
        terms={"kernel_dimension": float(kernel.shape[1]), "kernel_overlap": overlap},
    )
    logger.info("boundary bound (%s): c=%s", profile, f"{c:.6g}" if math.isfinite(c) else "inf")
    return report


# ============================================================================
# Decay estimation
# ============================================================================

@dataclass
class DecayFit:
    """
    Least-squares fit E(t) ~ M^2 E(0) exp(2 omega t).

    Unpacks as (M_hat, omega_hat, fit_quality).
    """

    M_hat: float
    omega_hat: float
    fit_quality: float
    samples: int
    window: Tuple[float, float]

    def __iter__(self) -> Iterator[float]:
        return iter((self.M_hat, self.omega_hat, self.fit_quality))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "M_hat": self.M_hat,
            "omega_hat": self.omega_hat,
            "fit_quality": self.fit_quality,
            "samples": self.samples,
            "window": list(self.window),
        }


def estimate_decay(
    trace: EnergyTrace,
    window_fraction: float = SolverDefaults.FIT_WINDOW
) -> DecayFit:
    """
    Fit a line through (t, log E) over the trailing window of the trace.

    omega_hat is half the slope; M_hat = sqrt(exp(intercept) / E(0));
    fit_quality is the coefficient of determination.

    Raises:
        ValueError: If window_fraction is not in (0, 1]
        UndefinedFitError: If fewer than 32 window samples have E > 0

    Example:
        >>> M, omega, quality = estimate_decay(trace)
    """
    if not 0.0 < window_fraction <= 1.0:
        raise ValueError(f"window_fraction must be in (0, 1], got {window_fraction}")
    t = trace.times
    E = trace.E_total
    t_start = t[-1] - window_fraction * (t[-1] - t[0])
    mask = (t >= t_start) & np.isfinite(E) & (E > 0.0)
    samples = int(np.count_nonzero(mask))
    if samples < SolverDefaults.MIN_FIT_SAMPLES:
        raise UndefinedFitError(
            f"decay fit needs {SolverDefaults.MIN_FIT_SAMPLES} samples with E > 0, got {samples}"
        )
    E0 = float(E[0])
    if not E0 > 0.0:
        raise UndefinedFitError("decay fit needs E(0) > 0")
    tw, logE = t[mask], np.log(E[mask])
    fit = scipy.stats.linregress(tw, logE)
    residual = logE - (fit.intercept + fit.slope * tw)
    ss_res = float(residual @ residual)
    centered = logE - logE.mean()
    ss_tot = float(centered @ centered)
    if ss_tot <= 1e-24 * samples:
        quality = 1.0 if ss_res <= 1e-24 * samples else 0.0
    else:
        quality = 1.0 - ss_res / ss_tot
    result = DecayFit(
        M_hat=math.sqrt(math.exp(fit.intercept) / E0),
        omega_hat=0.5 * float(fit.slope),
        fit_quality=quality,
        samples=samples,
        window=(float(tw[0]), float(tw[-1])),
    )
    logger.debug("decay fit: omega=%.6g, M=%.4g, R^2=%.6f", result.omega_hat, result.M_hat, quality)
    return result
