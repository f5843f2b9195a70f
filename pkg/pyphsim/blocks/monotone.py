"""
Monotone Feedback Maps for pyphsim

Maximal monotone maps phi on R^n used as boundary feedback laws
u in -phi(y). Every map is represented by two views only:
- resolve: the resolvent (I + alpha*phi)^{-1}, in closed form per kind
- minimal_section: the least-norm element of phi(v)

Kinds:
- ZeroMap: phi = 0 (free or forced-zero inputs)
- LinearMap: phi(v) = S v with S + S^T positive semidefinite
- Relay: phi(v) = F sign(v) + k v, phi(0) = [-F, F]
- Saturation: phi(v) = clip(k v, -u_max, u_max)
- Deadzone: phi(v) = k sign(v) max(|v| - delta, 0)
- PowerLaw: phi(v) = c |v|^(p-1) v, p >= 1
- PiecewiseLinear: slope k_in up to |v| = knee, slope k_out beyond
- BlockDiagonal: independent maps on consecutive component blocks

resolve accepts a scalar step or a positive step per component; the
latter is the resolvent of D^{-1} phi for a diagonal metric D.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from ..core.constants import SolverDefaults
from ..core.errors import DimensionError
from ..core.rng import SeedLike, make_rng

logger = logging.getLogger(__name__)

Step = Union[float, np.ndarray]


def _param(value: Any, n: int, name: str, minimum: float = 0.0, strict: bool = False) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise DimensionError(f"{name} must be a scalar or have length {n}, got shape {arr.shape}")
    bad = arr <= minimum if strict else arr < minimum
    if np.any(bad) or not np.all(np.isfinite(arr)):
        relation = ">" if strict else ">="
        raise ValueError(f"{name} must be finite and {relation} {minimum}, got {arr}")
    return arr


class MonotoneMap:
    """
    Base class of the feedback maps.

    Attributes:
        n: Dimension
        kind: Kind label used in configs and reports
        separable: True when phi acts on each component independently
    """

    kind = "abstract"
    separable = True

    def __init__(self, n: int):
        if n < 1:
            raise ValueError(f"dimension must be >= 1, got {n}")
        self.n = int(n)

    def _check(self, v: Any) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise DimensionError(
                f"{self.kind} map expects a vector of length {self.n}, got {v.shape}"
            )
        return v

    def _step(self, alpha: Step) -> np.ndarray:
        return _param(alpha, self.n, "alpha", strict=True)

    def resolve(self, alpha: Step, v: Any) -> np.ndarray:
        """Unique w with w + alpha * phi(w) containing v."""
        return self._resolve(self._step(alpha), self._check(v))

    def minimal_section(self, v: Any) -> np.ndarray:
        """Least-norm element of phi(v)."""
        return self._section(self._check(v))

    def graph_distance(self, w: Any, z: Any) -> float:
        """Euclidean distance from z to the set phi(w)."""
        return float(np.linalg.norm(self._distance(self._check(w), self._check(z))))

    def _resolve(self, alpha: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _section(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _distance(self, w: np.ndarray, z: np.ndarray) -> np.ndarray:
        return z - self._section(w)

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "n": self.n}

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n})"


class ZeroMap(MonotoneMap):
    """phi = 0; as feedback it forces the inputs to zero."""

    kind = "zero"

    def _resolve(self, alpha, v):
        return v.copy()

    def _section(self, v):
        return np.zeros_like(v)


class LinearMap(MonotoneMap):
    """
    phi(v) = S v.

    Monotone iff the symmetric part of S is positive semidefinite; the
    constructor does not enforce this (verify_monotone reports it).
    """

    kind = "linear"

    def __init__(self, S: Any):
        S = np.atleast_2d(np.asarray(S, dtype=float))
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise DimensionError(f"S must be a square matrix, got shape {S.shape}")
        super().__init__(S.shape[0])
        self.S = S
        self.separable = bool(np.all(S == np.diag(np.diag(S))))

    def _resolve(self, alpha, v):
        return np.linalg.solve(np.eye(self.n) + alpha[:, None] * self.S, v)

    def _section(self, v):
        return self.S @ v

    def describe(self):
        return {"kind": self.kind, "matrix": self.S.tolist()}

    def __repr__(self):
        return f"LinearMap(n={self.n})"


class Relay(MonotoneMap):
    """
    Relay (Coulomb friction) with optional viscous part.

    phi(v) = F sign(v) + k v for v != 0, phi(0) = [-F, F].

    Example:
        >>> Relay(level=1.0).resolve(0.5, [1.2])
        array([0.7])
    """

    kind = "relay"

    def __init__(self, level: Any = 1.0, viscous: Any = 0.0, n: int = 1):
        super().__init__(n)
        self.level = _param(level, n, "level")
        self.viscous = _param(viscous, n, "viscous")

    def _resolve(self, alpha, v):
        shrunk = np.sign(v) * np.maximum(np.abs(v) - alpha * self.level, 0.0)
        return shrunk / (1.0 + alpha * self.viscous)

    def _section(self, v):
        return self.level * np.sign(v) + self.viscous * v

    def _distance(self, w, z):
        on_branch = z - self._section(w)
        at_origin = np.maximum(np.abs(z) - self.level, 0.0)
        return np.where(w == 0.0, at_origin, on_branch)

    def describe(self):
        return {"kind": self.kind, "level": self.level.tolist(), "viscous": self.viscous.tolist()}

    def __repr__(self):
        return f"Relay(n={self.n}, level={self.level.tolist()}, viscous={self.viscous.tolist()})"


class Saturation(MonotoneMap):
    """phi(v) = clip(k v, -u_max, u_max)."""

    kind = "saturation"

    def __init__(self, gain: Any = 1.0, limit: Any = 1.0, n: int = 1):
        super().__init__(n)
        self.gain = _param(gain, n, "gain", strict=True)
        self.limit = _param(limit, n, "limit", strict=True)

    def _resolve(self, alpha, v):
        linear = v / (1.0 + alpha * self.gain)
        saturated = v - alpha * self.limit * np.sign(v)
        knee = self.limit / self.gain * (1.0 + alpha * self.gain)
        return np.where(np.abs(v) <= knee, linear, saturated)

    def _section(self, v):
        return np.clip(self.gain * v, -self.limit, self.limit)

    def describe(self):
        return {"kind": self.kind, "gain": self.gain.tolist(), "limit": self.limit.tolist()}


class Deadzone(MonotoneMap):
    """phi(v) = k sign(v) max(|v| - delta, 0)."""

    kind = "deadzone"

    def __init__(self, width: Any = 1.0, slope: Any = 1.0, n: int = 1):
        super().__init__(n)
        self.width = _param(width, n, "width")
        self.slope = _param(slope, n, "slope", strict=True)

    def _resolve(self, alpha, v):
        outside = np.sign(v) * (self.width + (np.abs(v) - self.width) / (1.0 + alpha * self.slope))
        return np.where(np.abs(v) <= self.width, v, outside)

    def _section(self, v):
        return self.slope * np.sign(v) * np.maximum(np.abs(v) - self.width, 0.0)

    def describe(self):
        return {"kind": self.kind, "width": self.width.tolist(), "slope": self.slope.tolist()}


class PowerLaw(MonotoneMap):
    """
    phi(v) = c |v|^(p-1) v with p >= 1.

    Resolvents are closed form for p in {1, 2, 3}; other exponents use a
    bracketed scalar root solve that terminates at machine precision.
    """

    kind = "power"

    def __init__(self, exponent: float = 3.0, gain: Any = 1.0, n: int = 1):
        super().__init__(n)
        if not math.isfinite(exponent) or exponent < 1.0:
            raise ValueError(f"exponent must be >= 1, got {exponent}")
        self.exponent = float(exponent)
        self.gain = _param(gain, n, "gain", strict=True)

    def _resolve(self, alpha, v):
        a = alpha * self.gain
        p = self.exponent
        if p == 1.0:
            return v / (1.0 + a)
        if p == 2.0:
            return 2.0 * v / (1.0 + np.sqrt(1.0 + 4.0 * a * np.abs(v)))
        if p == 3.0:
            root = np.sqrt(3.0 * a)
            return 2.0 / root * np.sinh(np.arcsinh(1.5 * root * v) / 3.0)
        out = np.zeros_like(v)
        for i, (ai, vi) in enumerate(zip(a, v)):
            target = abs(vi)
            if target == 0.0:
                continue
            w = brentq(
                lambda s: s + ai * s**p - target, 0.0, target,
                xtol=1e-300, rtol=4 * np.finfo(float).eps,
            )
            out[i] = math.copysign(w, vi)
        return out

    def _section(self, v):
        return self.gain * np.abs(v) ** (self.exponent - 1.0) * v

    def describe(self):
        return {"kind": self.kind, "exponent": self.exponent, "gain": self.gain.tolist()}

    def __repr__(self):
        return f"PowerLaw(n={self.n}, exponent={self.exponent})"


class PiecewiseLinear(MonotoneMap):
    """
    Two-slope damper: k_in * v for |v| <= knee, continuous slope k_out beyond.

    With k_in = kappa and k_out = 1/kappa the map lies in the sector
    [1/kappa, kappa].
    """

    kind = "piecewise"

    def __init__(self, slope_in: Any = 1.0, slope_out: Any = 1.0, knee: Any = 1.0, n: int = 1):
        super().__init__(n)
        self.slope_in = _param(slope_in, n, "slope_in")
        self.slope_out = _param(slope_out, n, "slope_out")
        self.knee = _param(knee, n, "knee", strict=True)

    def _resolve(self, alpha, v):
        inner = v / (1.0 + alpha * self.slope_in)
        outer_mag = (np.abs(v) + alpha * self.knee * (self.slope_out - self.slope_in)) / (
            1.0 + alpha * self.slope_out
        )
        limit = self.knee * (1.0 + alpha * self.slope_in)
        return np.where(np.abs(v) <= limit, inner, np.sign(v) * outer_mag)

    def _section(self, v):
        mag = np.abs(v)
        outer = self.slope_in * self.knee + self.slope_out * (mag - self.knee)
        return np.sign(v) * np.where(mag <= self.knee, self.slope_in * mag, outer)

    def describe(self):
        return {
            "kind": self.kind,
            "slope_in": self.slope_in.tolist(),
            "slope_out": self.slope_out.tolist(),
            "knee": self.knee.tolist(),
        }


class BlockDiagonal(MonotoneMap):
    """phi(v) = (phi_1(v_1), ..., phi_m(v_m)) on consecutive blocks."""

    kind = "block"

    def __init__(self, blocks: Sequence[MonotoneMap]):
        if not blocks:
            raise ValueError("BlockDiagonal needs at least one block")
        self.blocks: List[MonotoneMap] = list(blocks)
        super().__init__(sum(b.n for b in self.blocks))
        self.separable = all(b.separable for b in self.blocks)
        self._offsets = np.cumsum([0] + [b.n for b in self.blocks])

    def _split(self, v):
        return [v[a:b] for a, b in zip(self._offsets[:-1], self._offsets[1:])]

    def _resolve(self, alpha, v):
        return np.concatenate(
            [blk._resolve(a, part)
             for blk, a, part in zip(self.blocks, self._split(alpha), self._split(v))]
        )

    def _section(self, v):
        parts = zip(self.blocks, self._split(v))
        return np.concatenate([blk._section(part) for blk, part in parts])

    def _distance(self, w, z):
        return np.concatenate(
            [blk._distance(a, b) for blk, a, b in zip(self.blocks, self._split(w), self._split(z))]
        )

    def describe(self):
        return {"kind": self.kind, "blocks": [b.describe() for b in self.blocks]}

    def __repr__(self):
        return f"BlockDiagonal({', '.join(repr(b) for b in self.blocks)})"


def block_diagonal(*maps: MonotoneMap) -> BlockDiagonal:
    """Convenience constructor for BlockDiagonal."""
    return BlockDiagonal(maps)


def resolve(phi: MonotoneMap, alpha: Step, v: Any) -> np.ndarray:
    """(I + alpha*phi)^{-1} v."""
    return phi.resolve(alpha, v)


def minimal_section(phi: MonotoneMap, v: Any) -> np.ndarray:
    """Least-norm element of phi(v)."""
    return phi.minimal_section(v)


def membership(phi: MonotoneMap, w: Any, z: Any, tol: float = 1e-12) -> bool:
    """True when z lies in phi(w) up to tol (relative to max(1, |z|))."""
    z = np.asarray(z, dtype=float)
    return phi.graph_distance(w, z) <= tol * max(1.0, float(np.linalg.norm(z)))


@dataclass
class MonotonicityReport:
    """Outcome of verify_monotone."""

    passed: bool
    worst_pairing: float
    trials: int
    origin_fixed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "worst_pairing": self.worst_pairing,
            "trials": self.trials,
            "origin_fixed": self.origin_fixed,
        }


def verify_monotone(
    phi: MonotoneMap,
    trials: int = 256,
    seed: SeedLike = None
) -> MonotonicityReport:
    """
    Sample graph points through the resolvent and check monotonicity.

    Each trial draws v and alpha, sets w = resolve(phi, alpha, v) and
    z = (v - w)/alpha, a point of the graph. All pairs of points must
    satisfy <z - z', w - w'> >= -1e-12 * max(1, |z - z'| |w - w'|).
    """
    if trials < 2:
        raise ValueError(f"trials must be >= 2, got {trials}")
    rng = make_rng(seed)
    W = np.zeros((trials, phi.n))
    Z = np.zeros((trials, phi.n))
    for k in range(trials):
        scale = 10.0 ** rng.uniform(-3.0, 3.0)
        v = scale * rng.standard_normal(phi.n)
        alpha = 10.0 ** rng.uniform(-1.0, 1.0)
        w = phi.resolve(alpha, v)
        W[k], Z[k] = w, (v - w) / alpha

    dW = W[:, None, :] - W[None, :, :]
    dZ = Z[:, None, :] - Z[None, :, :]
    pairing = np.sum(dW * dZ, axis=2)
    allowance = 1e-12 * np.maximum(
        1.0, np.linalg.norm(dW, axis=2) * np.linalg.norm(dZ, axis=2)
    )
    worst = float(np.min(pairing))
    origin = bool(np.all(phi.resolve(1.0, np.zeros(phi.n)) == 0.0))
    passed = bool(np.all(pairing >= -allowance)) and origin
    logger.debug("verify_monotone %r: worst pairing %.3e", phi, worst)
    return MonotonicityReport(
        passed=passed, worst_pairing=worst, trials=trials, origin_fixed=origin
    )


@dataclass
class SectorReport:
    """
    Outcome of verify_sector.

    Attributes:
        ok: True when kappa^{-1}|v| <= |z| <= kappa|v| held at every sample
        kappa_tilde: (1/2) min(kappa, 1/kappa) when ok, else None
        min_ratio, max_ratio: Extremes of |z|/|v| seen
        witness: A violating v (component index, value), if any
    """

    ok: bool
    kappa: float
    kappa_tilde: Optional[float]
    min_ratio: float
    max_ratio: float
    witness: Optional[Dict[str, float]] = field(default=None)

    def __iter__(self):
        yield self.ok
        yield self.kappa_tilde

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ok": self.ok,
            "kappa": self.kappa,
            "kappa_tilde": self.kappa_tilde,
            "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio,
            "witness": self.witness,
        }


def verify_sector(
    phi: MonotoneMap,
    kappa: float,
    samples: int = 512,
    v_min: float = SolverDefaults.SECTOR_V_MIN,
    v_max: float = SolverDefaults.SECTOR_V_MAX,
    seed: SeedLike = None
) -> SectorReport:
    """
    Check the sector bounds kappa^{-1}|v| <= |z| <= kappa|v|, z = phi^0(v).

    Magnitudes are drawn log-uniformly on [v_min, v_max] with both signs,
    one component at a time; the endpoints are always included.

    Example:
        >>> ok, kappa_tilde = verify_sector(LinearMap([[2.0]]), 2.0)
        >>> ok, kappa_tilde
        (True, 0.25)
    """
    if not kappa > 0.0:
        raise ValueError(f"kappa must be > 0, got {kappa}")
    if not 0.0 < v_min < v_max:
        raise ValueError(f"need 0 < v_min < v_max, got [{v_min}, {v_max}]")
    if not phi.separable:
        raise ValueError(f"verify_sector needs a componentwise map, got {phi!r}")

    rng = make_rng(seed)
    mags = np.exp(rng.uniform(math.log(v_min), math.log(v_max), size=samples))
    mags = np.concatenate([[v_min, v_max], mags])
    lo, hi = 1.0 / kappa, kappa
    min_ratio, max_ratio = math.inf, 0.0
    witness = None
    for i in range(phi.n):
        for sign in (1.0, -1.0):
            for s in mags:
                v = np.zeros(phi.n)
                v[i] = sign * s
                ratio = abs(phi.minimal_section(v)[i]) / s
                min_ratio = min(min_ratio, ratio)
                max_ratio = max(max_ratio, ratio)
                violated = ratio < lo * (1.0 - 1e-12) or ratio > hi * (1.0 + 1e-12)
                if violated and witness is None:
                    witness = {"component": float(i), "v": float(v[i]), "ratio": float(ratio)}
    ok = witness is None
    kappa_tilde = 0.5 * min(kappa, 1.0 / kappa) if ok else None
    logger.debug(
        "verify_sector %r, kappa=%g: ratios [%.3e, %.3e]", phi, kappa, min_ratio, max_ratio
    )
    return SectorReport(
        ok=ok, kappa=float(kappa), kappa_tilde=kappa_tilde,
        min_ratio=float(min_ratio), max_ratio=float(max_ratio), witness=witness,
    )


def monotone_from_config(obj: Any, n: Optional[int] = None) -> MonotoneMap:
    """
    Build a map from its config form.

    Forms:
        {"kind": "zero", "n": 2}
        {"kind": "linear", "matrix": [[...]]}
        {"kind": "relay", "level": F, "viscous": k, "n": 1}
        {"kind": "saturation", "gain": k, "limit": u_max, "n": 1}
        {"kind": "deadzone", "width": delta, "slope": k, "n": 1}
        {"kind": "power", "exponent": p, "gain": c, "n": 1}
        {"kind": "piecewise", "slope_in": k1, "slope_out": k2, "knee": b, "n": 1}
        {"kind": "block", "blocks": [...]}
    A bare matrix is read as the linear kind.
    """
    if isinstance(obj, MonotoneMap):
        return obj
    if not isinstance(obj, Mapping):
        return LinearMap(obj)
    kind = obj.get("kind")
    size = int(obj.get("n", n or 1))
    if kind == "zero":
        return ZeroMap(size)
    if kind == "linear":
        return LinearMap(obj["matrix"])
    if kind == "relay":
        return Relay(obj.get("level", 1.0), obj.get("viscous", 0.0), n=size)
    if kind == "saturation":
        return Saturation(obj.get("gain", 1.0), obj.get("limit", 1.0), n=size)
    if kind == "deadzone":
        return Deadzone(obj.get("width", 1.0), obj.get("slope", 1.0), n=size)
    if kind == "power":
        return PowerLaw(float(obj.get("exponent", 3.0)), obj.get("gain", 1.0), n=size)
    if kind == "piecewise":
        return PiecewiseLinear(
            obj.get("slope_in", 1.0), obj.get("slope_out", 1.0), obj.get("knee", 1.0), n=size
        )
    if kind == "block":
        return BlockDiagonal([monotone_from_config(b) for b in obj["blocks"]])
    raise ValueError(f"unknown monotone map kind '{kind}'")
