"""
Scenario Catalog for pyphsim

Named, validated closed-loop setups. Each scenario carries default
parameters, an expected outcome tag and the stability profile its
conditions are checked under.

Tags:
    exponential-decay  the profile's sufficient conditions hold
    conservative       energy is preserved
    asymptotic-only    energy decays but no uniform rate is certified

Example:
    >>> loop, tag = instantiate("wave-sector-damper", {"kappa": 2.0})
    >>> trace = loop.run(seed=7)
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from ..blocks.controller import Controller, create_collocated_controller, verify_controller
from ..blocks.monotone import (
    BlockDiagonal,
    LinearMap,
    MonotoneMap,
    PiecewiseLinear,
    Relay,
    Saturation,
    ZeroMap,
    verify_monotone,
    verify_sector,
)
from ..core.constants import SolverDefaults
from ..core.discrete import DiscreteSystem, build_discrete
from ..core.errors import OverrideError, ProfileMismatchError, ScenarioError
from ..core.initial import InitialDatum
from ..core.model import PhsModel, sample_passivity
from ..core.rng import SeedLike
from ..core.simulator import ClosedLoop, Feedback
from ..core.stability import (
    ConditionReport,
    FeedbackPorts,
    check_boundary_bound,
    check_eb_condition,
    check_order2_condition,
)
from .models import beam_model, order2_model, wave_model

logger = logging.getLogger(__name__)

TAGS = ("exponential-decay", "conservative", "asymptotic-only")

COMMON_DEFAULTS: Dict[str, Any] = {
    "n_cells": 64,
    "dissipation": 0.1,
    "dt": 1.0 / 256,
    "T": 1.0,
    "stepper": "midpoint",
    "seed": 0,
    "amplitude": 0.2,
    "initial": "bump",
}

COMMON_CHOICES: Dict[str, Tuple[str, ...]] = {
    "stepper": ClosedLoop.STEPPERS,
    "initial": InitialDatum.PROFILES,
}


@dataclass
class SectorCheck:
    """Sector bound to verify on the damping map, globally and on |v| <= v_local."""

    phi: MonotoneMap
    kappa: float
    v_local: Optional[float] = None


@dataclass
class ScenarioParts:
    """What a scenario builder returns."""

    model: PhsModel
    feedback: Feedback
    ports: FeedbackPorts
    sector: Optional[SectorCheck] = None


@dataclass
class Scenario:
    """
    Catalog entry.

    Attributes:
        name: Catalog key
        description: One-line summary
        provenance: Where the setup comes from
        tag: Expected qualitative outcome
        profile: Stability profile (N1, N2 or EB)
        defaults: Parameter defaults beyond COMMON_DEFAULTS
        choices: Allowed values for string parameters
        build: Builder from the full parameter dict
    """

    name: str
    description: str
    provenance: str
    tag: str
    profile: str
    build: Callable[[Dict[str, Any]], ScenarioParts] = field(repr=False)
    defaults: Dict[str, Any] = field(default_factory=dict)
    choices: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    components: Tuple[int, ...] = (0,)

    def parameters(self) -> Dict[str, Any]:
        params = dict(COMMON_DEFAULTS)
        params.update(self.defaults)
        return params

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "description": self.description,
            "provenance": self.provenance,
            "tag": self.tag,
            "profile": self.profile,
            "parameters": self.parameters(),
        }


# ============================================================================
# Builders
# ============================================================================

_RIGHT_DAMPED = FeedbackPorts(output_projection=np.diag([0.0, 1.0]))


def _wave_sector(p: Dict[str, Any]) -> ScenarioParts:
    left = p["left"]
    model = wave_model(p["rho"], p["EI"], "dirichlet" if left == "dirichlet" else "neumann",
                       rho_rate=p["rho_rate"], EI_rate=p["EI_rate"])
    damper = PiecewiseLinear(p["kappa"], 1.0 / p["kappa"], p["knee"])
    left_map = Relay(p["level"]) if left == "relay" else ZeroMap(1)
    return ScenarioParts(
        model=model,
        feedback=BlockDiagonal([left_map, damper]),
        ports=_RIGHT_DAMPED,
        sector=SectorCheck(damper, p["kappa"]),
    )


def _wave_conservative(p: Dict[str, Any]) -> ScenarioParts:
    return ScenarioParts(
        model=wave_model(p["rho"], p["EI"], "neumann"),
        feedback=ZeroMap(2),
        ports=FeedbackPorts(output_projection=np.zeros((2, 2))),
    )


def _wave_relay(p: Dict[str, Any]) -> ScenarioParts:
    return ScenarioParts(
        model=wave_model(p["rho"], p["EI"], "neumann"),
        feedback=BlockDiagonal([Relay(p["left_level"]), Relay(p["level"], p["viscous"])]),
        ports=_RIGHT_DAMPED,
    )


def _wave_saturating(p: Dict[str, Any]) -> ScenarioParts:
    damper = Saturation(p["gain"], p["limit"])
    return ScenarioParts(
        model=wave_model(p["rho"], p["EI"], "dirichlet"),
        feedback=BlockDiagonal([ZeroMap(1), damper]),
        ports=_RIGHT_DAMPED,
        sector=SectorCheck(damper, max(p["gain"], 1.0 / p["gain"]), v_local=p["limit"] / p["gain"]),
    )


def _wave_collocated(p: Dict[str, Any]) -> ScenarioParts:
    return ScenarioParts(
        model=wave_model(p["rho"], p["EI"], "neumann"),
        feedback=create_collocated_controller(2, p["gain"], name="wave-collocated"),
        ports=FeedbackPorts(),
    )


def _order2(p: Dict[str, Any]) -> ScenarioParts:
    return ScenarioParts(
        model=order2_model(p["H_rate"], p["damping"]),
        feedback=LinearMap(p["k"] * np.eye(4)),
        ports=FeedbackPorts(),
    )


def _beam_damped(p: Dict[str, Any]) -> ScenarioParts:
    return ScenarioParts(
        model=beam_model(p["rho"], p["EI"], rho_rate=p["rho_rate"], EI_rate=p["EI_rate"]),
        feedback=LinearMap(p["k"] * np.eye(4)),
        ports=FeedbackPorts(),
    )


def _beam_collocated(p: Dict[str, Any]) -> ScenarioParts:
    return ScenarioParts(
        model=beam_model(p["rho"], p["EI"], rho_rate=p["rho_rate"], EI_rate=p["EI_rate"]),
        feedback=create_collocated_controller(4, p["gain"], name="beam-collocated"),
        ports=FeedbackPorts(),
    )


_WAVE = {"rho": 1.0, "EI": 1.0}
_PROFILE_RATES = {"rho_rate": 0.0, "EI_rate": 0.0}

CATALOG: Dict[str, Scenario] = {
    s.name: s for s in [
        Scenario(
            name="wave-sector-damper",
            description="Wave equation, sector-bounded two-slope damper at the right end",
            provenance="first-order wave example with damper g, "
                       "kappa^{-1}|v| <= |g(v)| <= kappa|v|",
            tag="exponential-decay",
            profile="N1",
            build=_wave_sector,
            defaults={**_WAVE, **_PROFILE_RATES, "kappa": 2.0, "knee": 1.0,
                      "left": "dirichlet", "level": 0.5},
            choices={"left": ("dirichlet", "neumann", "relay")},
        ),
        Scenario(
            name="wave-neumann-conservative",
            description="Undamped wave with free (Neumann) ends",
            provenance="wave example with zero feedback, energy preserving",
            tag="conservative",
            profile="N1",
            build=_wave_conservative,
            defaults={**_WAVE, "dissipation": 0.0},
        ),
        Scenario(
            name="wave-relay-damper",
            description="Wave with a dry-friction relay at each end, viscous part on the right",
            provenance="wave example with multi-valued Neumann feedback f",
            tag="asymptotic-only",
            profile="N1",
            build=_wave_relay,
            defaults={**_WAVE, "left_level": 0.2, "level": 0.5, "viscous": 1.0},
        ),
        Scenario(
            name="wave-saturating-damper",
            description="Wave with a saturating damper at the right end",
            provenance="saturating damper, asymptotic stability without a sector bound",
            tag="asymptotic-only",
            profile="N1",
            build=_wave_saturating,
            defaults={**_WAVE, "gain": 1.0, "limit": 1.0},
        ),
        Scenario(
            name="wave-collocated",
            description="Wave closed by a collocated first-order controller on both ports",
            provenance="dynamic feedback with A_c = -I, B_c = I, D_c = gain I",
            tag="exponential-decay",
            profile="N1",
            build=_wave_collocated,
            defaults={**_WAVE, "gain": 1.0},
        ),
        Scenario(
            name="order2-damped",
            description="Second-order system with weak internal damping and full port damping",
            provenance="second-order systems with small lower-order terms",
            tag="exponential-decay",
            profile="N2",
            build=_order2,
            defaults={"H_rate": 0.0, "damping": 0.1, "k": 1.0},
        ),
        Scenario(
            name="eb-beam-damped",
            description="Euler-Bernoulli beam with linear damping on all four ports",
            provenance="Euler-Bernoulli beam rho w_tt + (EI w_zz)_zz = 0",
            tag="exponential-decay",
            profile="EB",
            build=_beam_damped,
            defaults={**_WAVE, **_PROFILE_RATES, "k": 1.0},
        ),
        Scenario(
            name="eb-beam-collocated",
            description="Euler-Bernoulli beam closed by a collocated controller",
            provenance="beam with dynamic feedback, A_c = -I, B_c = I, D_c = I, Pi = I",
            tag="exponential-decay",
            profile="EB",
            build=_beam_collocated,
            defaults={**_WAVE, **_PROFILE_RATES, "gain": 1.0},
        ),
    ]
}


def list_scenarios() -> List[Dict[str, Any]]:
    """Catalog entries with provenance, tag and default parameters."""
    return [CATALOG[name].to_dict() for name in sorted(CATALOG)]


def get_scenario(name: str) -> Scenario:
    try:
        return CATALOG[name]
    except KeyError:
        raise ScenarioError(f"unknown scenario '{name}'; available: {sorted(CATALOG)}") from None


# ============================================================================
# Instantiation
# ============================================================================

def _coerce(key: str, value: Any, default: Any, choices: Optional[Tuple[str, ...]]) -> Any:
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        raise OverrideError(f"override '{key}' must be a boolean, got {value!r}")
    if isinstance(default, int):
        if isinstance(value, bool):
            raise OverrideError(f"override '{key}' must be an integer, got {value!r}")
        try:
            number = float(value)
        except (TypeError, ValueError):
            raise OverrideError(f"override '{key}' must be an integer, got {value!r}") from None
        if not number.is_integer():
            raise OverrideError(f"override '{key}' must be an integer, got {value!r}")
        return int(number)
    if isinstance(default, float):
        if isinstance(value, bool):
            raise OverrideError(f"override '{key}' must be a number, got {value!r}")
        try:
            number = float(value)
        except (TypeError, ValueError):
            raise OverrideError(f"override '{key}' must be a number, got {value!r}") from None
        if not math.isfinite(number):
            raise OverrideError(f"override '{key}' must be finite, got {value!r}")
        return number
    value = str(value)
    if choices is not None and value not in choices:
        raise OverrideError(f"override '{key}' must be one of {choices}, got '{value}'")
    return value


def resolve_parameters(
    scenario: Scenario,
    overrides: Optional[Mapping[str, Any]] = None
) -> Dict[str, Any]:
    """
    Merge and type-check overrides against the scenario's defaults.

    Raises:
        OverrideError: Unknown key, wrong type or out-of-range value
    """
    params = scenario.parameters()
    choices = {**COMMON_CHOICES, **scenario.choices}
    for key, value in (overrides or {}).items():
        if key not in params:
            raise OverrideError(
                f"scenario '{scenario.name}' has no parameter '{key}'; known: {sorted(params)}"
            )
        params[key] = _coerce(key, value, params[key], choices.get(key))
    if not params["dt"] > 0.0:
        raise OverrideError(f"dt must be > 0, got {params['dt']}")
    if not params["T"] > 0.0:
        raise OverrideError(f"T must be > 0, got {params['T']}")
    if params["amplitude"] < 0.0:
        raise OverrideError(f"amplitude must be >= 0, got {params['amplitude']}")
    if params["dissipation"] < 0.0:
        raise OverrideError(f"dissipation must be >= 0, got {params['dissipation']}")
    return params


@dataclass
class ScenarioSetup:
    """A scenario with resolved parameters and built parts."""

    scenario: Scenario
    params: Dict[str, Any]
    parts: ScenarioParts
    _system: Optional[DiscreteSystem] = field(default=None, repr=False)

    @property
    def model(self) -> PhsModel:
        return self.parts.model

    @property
    def system(self) -> DiscreteSystem:
        if self._system is None:
            p = self.params
            self._system = build_discrete(self.model, p["n_cells"], dissipation=p["dissipation"])
        return self._system

    def initial(self) -> InitialDatum:
        return InitialDatum(
            profile=self.params["initial"],
            amplitude=self.params["amplitude"],
            components=self.scenario.components,
        )

    def loop(self, **solver: Any) -> ClosedLoop:
        p = self.params
        return ClosedLoop(
            self.system,
            self.parts.feedback,
            stepper=p["stepper"],
            dt=p["dt"],
            T=p["T"],
            initial=self.initial(),
            ports=self.parts.ports,
            name=self.scenario.name,
            metadata={
                "scenario": self.scenario.name,
                "tag": self.scenario.tag,
                "profile": self.scenario.profile,
                "parameters": dict(p),
            },
            **solver,
        )

    def conditions(self, seed: SeedLike = None) -> List[ConditionReport]:
        return condition_reports(
            self.model, self.parts.feedback, self.parts.ports, self.scenario.profile,
            sector=self.parts.sector, seed=self.params["seed"] if seed is None else seed,
        )


def build_scenario(name: str, overrides: Optional[Mapping[str, Any]] = None) -> ScenarioSetup:
    """
    Resolve a scenario and build its model and feedback.

    Raises:
        ScenarioError: Unknown name
        OverrideError: Invalid override, including values the builders reject
    """
    scenario = get_scenario(name)
    params = resolve_parameters(scenario, overrides)
    try:
        parts = scenario.build(params)
    except (ValueError, ProfileMismatchError) as e:
        if isinstance(e, OverrideError):
            raise
        raise OverrideError(f"scenario '{name}' rejected its parameters: {e}") from e
    min_cells = 8 * parts.model.N
    if params["n_cells"] < min_cells:
        raise OverrideError(f"n_cells must be >= {min_cells} for '{name}', got {params['n_cells']}")
    logger.debug("scenario '%s' built with %s", name, params)
    return ScenarioSetup(scenario=scenario, params=params, parts=parts)


def instantiate(name: str, overrides: Optional[Mapping[str, Any]] = None) -> Tuple[ClosedLoop, str]:
    """
    Build a ready-to-run loop for a catalog scenario.

    Returns:
        (ClosedLoop, expected outcome tag)

    Raises:
        ScenarioError: Unknown name
        OverrideError: Invalid override
    """
    setup = build_scenario(name, overrides)
    return setup.loop(), setup.scenario.tag


# ============================================================================
# Conditions
# ============================================================================

def _sector_report(check: SectorCheck, v_max: float, label: str, seed: SeedLike) -> ConditionReport:
    sector = verify_sector(check.phi, check.kappa, v_max=v_max, seed=seed)
    upper = sector.max_ratio / check.kappa
    lower = math.inf if sector.min_ratio == 0.0 else 1.0 / (check.kappa * sector.min_ratio)
    return ConditionReport(
        name=label,
        lhs=max(upper, lower),
        threshold=1.0,
        passed=sector.ok,
        terms={
            "kappa": check.kappa,
            "kappa_tilde": sector.kappa_tilde or 0.0,
            "min_ratio": sector.min_ratio,
            "max_ratio": sector.max_ratio,
        },
    )


def condition_reports(
    model: PhsModel,
    feedback: Feedback,
    ports: Optional[FeedbackPorts],
    profile: str,
    sector: Optional[SectorCheck] = None,
    seed: SeedLike = None
) -> List[ConditionReport]:
    """
    All checks applicable to a model, feedback and profile.

    Always: passivity sample, feedback verification, boundary bound.
    N2 and EB add the order-2 condition, EB the Euler-Bernoulli condition,
    and a sector check is added when one is declared.

    Raises:
        ProfileMismatchError: If the profile does not fit the model
    """
    reports: List[ConditionReport] = []

    passivity = sample_passivity(model, seed=seed)
    reports.append(ConditionReport(
        name="passivity",
        lhs=max(0.0, -passivity.worst_margin) / passivity.scale,
        threshold=1e-8,
        passed=passivity.passed,
        terms={"worst_margin": passivity.worst_margin, "trials": float(passivity.trials)},
    ))

    if isinstance(feedback, Controller):
        ctrl = verify_controller(feedback, seed=seed)
        reports.append(ConditionReport(
            name="controller",
            lhs=ctrl.rho,
            threshold=0.0,
            passed=ctrl.passed,
            terms={"rho": ctrl.rho, "c_prime": ctrl.c_prime, "delta": ctrl.delta, "c": ctrl.c},
        ))
    else:
        mono = verify_monotone(feedback, seed=seed)
        reports.append(ConditionReport(
            name="monotone",
            lhs=max(0.0, -mono.worst_pairing),
            threshold=0.0,
            passed=mono.passed,
            terms={"worst_pairing": mono.worst_pairing},
        ))

    if profile in ("N2", "EB"):
        reports.append(check_order2_condition(model))
    if profile == "EB":
        reports.append(check_eb_condition(model))
    reports.append(check_boundary_bound(model, ports, profile))

    if sector is not None:
        reports.append(_sector_report(sector, SolverDefaults.SECTOR_V_MAX, "sector", seed))
        if sector.v_local is not None:
            name = f"sector[|v|<={sector.v_local:g}]"
            reports.append(_sector_report(sector, sector.v_local, name, seed))
    return reports
