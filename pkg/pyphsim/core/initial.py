"""Initial data on the nodal grid."""

from dataclasses import dataclass, field
from typing import Any, Dict, Sequence, Tuple

import numpy as np

from .rng import SeedLike, make_rng


def smoothstep(t: np.ndarray) -> np.ndarray:
    """C^2 ramp from 0 (t <= 0) to 1 (t >= 1)."""
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def plateau(zeta: np.ndarray, rise: Sequence[float], fall: Sequence[float]) -> np.ndarray:
    """C^2 plateau: 0 before rise[0], 1 on [rise[1], fall[0]], 0 after fall[1]."""
    up = smoothstep((zeta - rise[0]) / (rise[1] - rise[0]))
    down = smoothstep((fall[1] - zeta) / (fall[1] - fall[0]))
    return up * down


@dataclass
class InitialDatum:
    """
    Initial plant and controller state.

    Profiles:
        zero: x = 0
        bump: amplitude * plateau(rise, fall) on the listed components
        random-bumps: seeded sum of `count` C^2 bumps per listed component

    Example:
        >>> x0, xc0 = InitialDatum("bump", amplitude=0.2).sample(system)
    """

    profile: str = "bump"
    amplitude: float = 0.2
    components: Sequence[int] = (0,)
    rise: Tuple[float, float] = (0.0, 0.2)
    fall: Tuple[float, float] = (0.8, 1.0)
    count: int = 3
    controller_amplitude: float = 0.0
    extra: Dict[str, Any] = field(default_factory=dict)

    PROFILES = ("zero", "bump", "random-bumps")

    def __post_init__(self):
        if self.profile not in self.PROFILES:
            raise ValueError(
                f"initial profile must be one of {self.PROFILES}, got '{self.profile}'"
            )

    def nodal(self, nodes: np.ndarray, d: int, seed: SeedLike = None) -> np.ndarray:
        X = np.zeros((nodes.size, d))
        if self.profile == "zero":
            return X
        for i in self.components:
            if not 0 <= i < d:
                raise ValueError(f"component {i} out of range for dimension {d}")
        if self.profile == "bump":
            shape = plateau(nodes, self.rise, self.fall)
            for i in self.components:
                X[:, i] = self.amplitude * shape
            return X
        rng = make_rng(seed)
        for i in self.components:
            for _ in range(self.count):
                center = rng.uniform(0.25, 0.75)
                width = rng.uniform(0.1, 0.2)
                height = self.amplitude * rng.uniform(-1.0, 1.0)
                a, b = center - width, center + width
                rise, fall = (a, center - 0.5 * width), (center + 0.5 * width, b)
                X[:, i] += height * plateau(nodes, rise, fall)
        return X

    def sample(
        self,
        system: Any,
        n_c: int = 0,
        seed: SeedLike = None
    ) -> Tuple[np.ndarray, np.ndarray]:
        """(x0, x_c0) for a DiscreteSystem and a controller dimension."""
        rng = make_rng(seed)
        X = self.nodal(system.nodes, system.model.d, rng)
        xc0 = self.controller_amplitude * rng.standard_normal(n_c) if n_c else np.zeros(0)
        return X.reshape(-1), xc0

    @classmethod
    def from_config(cls, obj: Dict[str, Any]) -> "InitialDatum":
        known = {
            "profile", "amplitude", "components", "rise", "fall", "count", "controller_amplitude",
        }
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown initial-datum keys: {sorted(unknown)}")
        kwargs = dict(obj)
        for key in ("rise", "fall"):
            if key in kwargs:
                kwargs[key] = tuple(float(v) for v in kwargs[key])
        if "components" in kwargs:
            kwargs["components"] = tuple(int(v) for v in kwargs["components"])
        return cls(**kwargs)

    def describe(self) -> Dict[str, Any]:
        return {
            "profile": self.profile,
            "amplitude": self.amplitude,
            "components": list(self.components),
            "rise": list(self.rise),
            "fall": list(self.fall),
            "count": self.count,
            "controller_amplitude": self.controller_amplitude,
        }
