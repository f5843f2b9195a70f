"""
Scenarios for pyphsim

Canned wave, second-order and Euler-Bernoulli setups with static or
dynamic boundary feedback.
"""

from .catalog import (
    CATALOG,
    TAGS,
    Scenario,
    ScenarioParts,
    ScenarioSetup,
    SectorCheck,
    build_scenario,
    condition_reports,
    get_scenario,
    instantiate,
    list_scenarios,
    resolve_parameters,
)
from .models import beam_model, order2_model, transport_model, wave_model

__all__ = [
    "CATALOG",
    "TAGS",
    "Scenario",
    "ScenarioParts",
    "ScenarioSetup",
    "SectorCheck",
    "build_scenario",
    "condition_reports",
    "get_scenario",
    "instantiate",
    "list_scenarios",
    "resolve_parameters",
    "beam_model",
    "order2_model",
    "transport_model",
    "wave_model",
]
