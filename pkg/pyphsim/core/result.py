"""
Energy Trace for pyphsim

Container for closed-loop runs with export capabilities:
- to_numpy(), to_dict(), to_dataframe(), to_csv()
- slice_time() and summary statistics

Row k holds the state after step k. Per-step quantities (power
residual, difference quotient, port values of the step's inclusion) of
step k live in row k; row 0 carries the initial energies, the ports read
from the initial traces, and zeros for the per-step quantities.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


class EnergyTrace:
    """
    Time series of a closed-loop run.

    Attributes:
        times: Time grid (n_t,)
        E_state: Plant energy 1/2 <x, x>_h
        E_controller: Controller energy 1/2 <<x_c, x_c>> (zeros for static feedback)
        u, y: Port values (n_t, Nd)
        y_c: Controller outputs (n_t, Nd); zeros for static feedback
        power_residual: Per-step energy balance defect
        diffquot_norm: Per-step |x_{n+1} - x_n|_h / dt (controller weight included)
        iterations: Inner solver iterations per step
        states: Optional flat plant states (n_t, size)
        controller_states: Optional controller states (n_t, n_c)
        metadata: Run description (scenario, stepper, dt, ...)

    Example:
        >>> trace = loop.run(x0)
        >>> df = trace.to_dataframe()
        >>> trace.to_csv("trace.csv")
    """

    def __init__(
        self,
        times: np.ndarray,
        E_state: np.ndarray,
        E_controller: np.ndarray,
        u: np.ndarray,
        y: np.ndarray,
        y_c: np.ndarray,
        power_residual: np.ndarray,
        diffquot_norm: np.ndarray,
        iterations: Optional[np.ndarray] = None,
        states: Optional[np.ndarray] = None,
        controller_states: Optional[np.ndarray] = None,
        metadata: Optional[Dict[str, Any]] = None
    ):
        self.times = np.asarray(times, dtype=float)
        n_t = self.times.size
        self.E_state = np.asarray(E_state, dtype=float)
        self.E_controller = np.asarray(E_controller, dtype=float)
        self.u = np.atleast_2d(np.asarray(u, dtype=float))
        self.y = np.atleast_2d(np.asarray(y, dtype=float))
        self.y_c = np.atleast_2d(np.asarray(y_c, dtype=float))
        self.power_residual = np.asarray(power_residual, dtype=float)
        self.diffquot_norm = np.asarray(diffquot_norm, dtype=float)
        self.iterations = (
            np.zeros(n_t, dtype=int) if iterations is None else np.asarray(iterations, dtype=int)
        )
        self.states = states
        self.controller_states = controller_states
        self.metadata = metadata or {}

        for name in ("E_state", "E_controller", "power_residual", "diffquot_norm", "iterations"):
            length = getattr(self, name).shape[0]
            if length != n_t:
                raise ValueError(f"{name} has length {length}, expected {n_t} to match times")
        for name in ("u", "y", "y_c"):
            length = getattr(self, name).shape[0]
            if length != n_t:
                raise ValueError(f"{name} has {length} rows, expected {n_t} to match times")

    @property
    def n_ports(self) -> int:
        return self.u.shape[1]

    @property
    def E_total(self) -> np.ndarray:
        return self.E_state + self.E_controller

    def __len__(self) -> int:
        return self.times.size

    def __repr__(self) -> str:
        return (
            f"EnergyTrace(t=[{self.times[0]:.3g}, {self.times[-1]:.3g}], "
            f"points={len(self)}, ports={self.n_ports}, "
            f"E0={self.E_total[0]:.6g}, E_end={self.E_total[-1]:.6g})"
        )

    def to_numpy(self) -> tuple:
        """(times, E_total) as copies."""
        return self.times.copy(), self.E_total.copy()

    def columns(self) -> Dict[str, np.ndarray]:
        data = {
            "t": self.times,
            "E_state": self.E_state,
            "E_ctrl": self.E_controller,
            "power_residual": self.power_residual,
            "diffquot_norm": self.diffquot_norm,
        }
        for i in range(self.n_ports):
            data[f"u_{i + 1}"] = self.u[:, i]
        for i in range(self.n_ports):
            data[f"y_{i + 1}"] = self.y[:, i]
        return data

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {name: values.tolist() for name, values in self.columns().items()}
        out["metadata"] = dict(self.metadata)
        return out

    def to_dataframe(self) -> pd.DataFrame:
        """Trace table with columns t, E_state, E_ctrl, power_residual, diffquot_norm, u_i, y_i."""
        return pd.DataFrame(self.columns())

    def to_csv(self, filename: Union[str, Path], **kwargs) -> None:
        """
        Write the trace table; byte-identical for identical runs.

        Args:
            filename: Output CSV path
            **kwargs: Forwarded to pandas.DataFrame.to_csv
        """
        kwargs.setdefault("index", False)
        kwargs.setdefault("lineterminator", "\n")
        kwargs.setdefault("float_format", "%.17g")
        self.to_dataframe().to_csv(filename, **kwargs)
        logger.info("wrote trace (%d rows) to %s", len(self), filename)

    def slice_time(
        self,
        t_start: Optional[float] = None,
        t_end: Optional[float] = None
    ) -> "EnergyTrace":
        """New trace restricted to t_start <= t < t_end."""
        start = 0 if t_start is None else int(np.searchsorted(self.times, t_start))
        end = len(self) if t_end is None else int(np.searchsorted(self.times, t_end))
        part = slice(start, end)
        return EnergyTrace(
            times=self.times[part],
            E_state=self.E_state[part],
            E_controller=self.E_controller[part],
            u=self.u[part],
            y=self.y[part],
            y_c=self.y_c[part],
            power_residual=self.power_residual[part],
            diffquot_norm=self.diffquot_norm[part],
            iterations=self.iterations[part],
            states=None if self.states is None else self.states[part],
            controller_states=(
                None if self.controller_states is None else self.controller_states[part]
            ),
            metadata={**self.metadata, "sliced": True},
        )

    def summary(self) -> Dict[str, Any]:
        """Headline numbers of the run."""
        E = self.E_total
        steps = max(len(self) - 1, 0)
        return {
            "points": len(self),
            "t_end": float(self.times[-1]),
            "E_initial": float(E[0]),
            "E_final": float(E[-1]),
            "E_ratio": float(E[-1] / E[0]) if E[0] > 0.0 else None,
            "max_power_residual": float(np.max(self.power_residual)),
            "solver": {
                "steps": steps,
                "total_iterations": int(np.sum(self.iterations)),
                "max_iterations": int(np.max(self.iterations)) if steps else 0,
            },
        }

    def print_summary(self) -> None:
        """Print a formatted summary of the run."""
        info = self.summary()
        print(f"Energy trace: {self.metadata.get('scenario', 'custom loop')}")
        print(f"  Time span: [{self.times[0]:.3f}, {info['t_end']:.3f}]  ({info['points']} points)")
        print(f"  Energy: {info['E_initial']:.6e} -> {info['E_final']:.6e}")
        print(f"  Max power residual: {info['max_power_residual']:.3e}")
        solver = info["solver"]
        print(
            f"  Inner solver: {solver['total_iterations']} iterations over "
            f"{solver['steps']} steps (max {solver['max_iterations']})"
        )
