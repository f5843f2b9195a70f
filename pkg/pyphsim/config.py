"""
Run Configuration for pyphsim

A run is described by one JSON document naming either a catalog
scenario (plus overrides) or an inline model, feedback, grid and time
description. See docs/Config_Schema.md for the full schema.

Example:
    >>> config = load_config("configs/wave_static.json")
    >>> setup = config.setup()
    >>> trace = setup.loop().run(seed=config.seed)
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .blocks.controller import Controller
from .blocks.monotone import monotone_from_config
from .core.errors import ConfigError, OverrideError
from .core.model import build_model
from .core.port import wiring_from_traces
from .core.stability import PROFILES, FeedbackPorts
from .scenarios.catalog import (
    COMMON_DEFAULTS,
    TAGS,
    Scenario,
    ScenarioParts,
    ScenarioSetup,
    SectorCheck,
    build_scenario,
    resolve_parameters,
)
from .scenarios.models import beam_model, order2_model, transport_model, wave_model

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

BUILDERS = {
    "wave": wave_model,
    "beam": beam_model,
    "order2": order2_model,
    "transport": transport_model,
}

_TOP_LEVEL = {
    "schema", "scenario", "overrides", "model", "feedback", "ports", "profile", "tag",
    "grid", "time", "initial", "sector", "seed", "out", "emit", "solver", "lambda",
    "sweep", "window_fraction", "name",
}


def parse_setting(text: str) -> Tuple[str, Any]:
    """
    Split a `key=value` override; the value is read as JSON when possible.

    Example:
        >>> parse_setting("kappa=2")
        ('kappa', 2)
        >>> parse_setting("left=relay")
        ('left', 'relay')
    """
    if "=" not in text:
        raise ConfigError(f"override must look like key=value, got '{text}'")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override has an empty key: '{text}'")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def parse_complex(value: Any) -> complex:
    """
    Read a complex number given as a number, a string like "2+1j", or an
    [re, im] pair.

    Raises:
        ConfigError: If the value is none of these
    """
    if isinstance(value, bool):
        raise ConfigError(f"not a complex number: {value!r}")
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ConfigError(f"complex pairs must be [re, im], got {value!r}")
        return complex(float(value[0]), float(value[1]))
    try:
        return complex(str(value).replace(" ", ""))
    except ValueError:
        raise ConfigError(f"not a complex number: {value!r}") from None


def _model_from_config(obj: Mapping[str, Any]) -> Any:
    if "builder" in obj:
        name = obj["builder"]
        if name not in BUILDERS:
            raise ConfigError(f"unknown model builder '{name}', expected one of {sorted(BUILDERS)}")
        kwargs = {k: v for k, v in obj.items() if k != "builder"}
        try:
            return BUILDERS[name](**kwargs)
        except TypeError as e:
            raise ConfigError(f"model builder '{name}': {e}") from e
    description = dict(obj)
    if "W_B" not in description and "input_rows" in description:
        W_B, W_C = wiring_from_traces(
            [np.asarray(P, dtype=float) for P in description["P"]],
            description.pop("input_rows"),
            description.pop("output_rows"),
        )
        description["W_B"], description["W_C"] = W_B, W_C
    return build_model(description)


def _feedback_from_config(obj: Any, n_ports: int) -> Any:
    if isinstance(obj, Mapping) and "controller" in obj:
        return Controller.from_config(obj["controller"])
    return monotone_from_config(obj, n=n_ports)


@dataclass
class RunConfig:
    """
    Parsed run configuration.

    Exactly one of `scenario` and `model` is set.
    """

    scenario: Optional[str] = None
    overrides: Dict[str, Any] = field(default_factory=dict)
    model: Optional[Dict[str, Any]] = None
    feedback: Any = None
    ports: Dict[str, Any] = field(default_factory=dict)
    profile: Optional[str] = None
    tag: str = "unspecified"
    settings: Dict[str, Any] = field(default_factory=dict)
    initial: Dict[str, Any] = field(default_factory=dict)
    sector: Optional[Dict[str, Any]] = None
    seed: Optional[int] = None
    out: Optional[str] = None
    emit_states: bool = False
    tol: Optional[float] = None
    max_iter: Optional[int] = None
    lambdas: List[complex] = field(default_factory=list)
    sweep: Optional[Dict[str, Any]] = None
    window_fraction: float = 0.5
    name: Optional[str] = None
    source: Optional[str] = None

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], source: Optional[str] = None) -> "RunConfig":
        """
        Validate a configuration tree.

        Raises:
            ConfigError: Unknown keys, a wrong schema version, or not
                exactly one of scenario / model
        """
        if not isinstance(data, Mapping):
            raise ConfigError("configuration root must be an object")
        unknown = set(data) - _TOP_LEVEL
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        schema = data.get("schema", SCHEMA_VERSION)
        if schema != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema version {schema}, expected {SCHEMA_VERSION}")
        has_scenario = "scenario" in data
        has_model = "model" in data
        if has_scenario == has_model:
            raise ConfigError("configuration needs exactly one of 'scenario' and 'model'")
        if has_model and "feedback" not in data:
            raise ConfigError("inline configuration needs 'feedback'")
        if has_scenario and "feedback" in data:
            raise ConfigError("'feedback' is only allowed with an inline 'model'")

        profile = data.get("profile")
        if profile is not None:
            profile = str(profile).upper()
            if profile not in PROFILES:
                raise ConfigError(f"profile must be one of {PROFILES}, got '{data['profile']}'")
        tag = str(data.get("tag", "unspecified"))
        if tag not in TAGS + ("unspecified",):
            raise ConfigError(f"tag must be one of {TAGS}, got '{tag}'")

        settings: Dict[str, Any] = {}
        for section in ("grid", "time"):
            block = data.get(section, {})
            if not isinstance(block, Mapping):
                raise ConfigError(f"'{section}' must be an object")
            settings.update(block)

        solver = data.get("solver", {})
        emit = data.get("emit", {})
        sweep = data.get("sweep")
        if sweep is not None:
            if not isinstance(sweep, Mapping) or "parameter" not in sweep or "values" not in sweep:
                raise ConfigError("'sweep' needs 'parameter' and 'values'")
            if not sweep["values"]:
                raise ConfigError("'sweep.values' must not be empty")
        lambdas = [parse_complex(v) for v in data.get("lambda", [])]
        initial = dict(data.get("initial", {}))
        unknown = set(initial) - {"profile", "amplitude", "components"}
        if unknown:
            raise ConfigError(f"unknown 'initial' keys: {sorted(unknown)}")

        seed = data.get("seed")
        if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
            raise ConfigError(f"seed must be an integer, got {seed!r}")

        return cls(
            scenario=data.get("scenario"),
            overrides=dict(data.get("overrides", {})),
            model=dict(data["model"]) if has_model else None,
            feedback=data.get("feedback"),
            ports=dict(data.get("ports", {})),
            profile=profile,
            tag=tag,
            settings=settings,
            initial=initial,
            sector=data.get("sector"),
            seed=seed,
            out=data.get("out"),
            emit_states=bool(emit.get("states", False)),
            tol=solver.get("tol"),
            max_iter=solver.get("max_iter"),
            lambdas=lambdas,
            sweep=dict(sweep) if sweep is not None else None,
            window_fraction=float(data.get("window_fraction", 0.5)),
            name=data.get("name"),
            source=source,
        )

    @classmethod
    def for_scenario(cls, name: str) -> "RunConfig":
        return cls(scenario=name)

    def apply_settings(self, pairs: Sequence[Tuple[str, Any]]) -> None:
        """
        Apply `--set` overrides: scenario parameters, or grid/time/initial
        keys of an inline configuration.
        """
        for key, value in pairs:
            if self.scenario is not None:
                self.overrides[key] = value
            elif key in COMMON_DEFAULTS:
                if key == "seed":
                    self.seed = value
                elif key in ("amplitude", "initial"):
                    self.initial["amplitude" if key == "amplitude" else "profile"] = value
                else:
                    self.settings[key] = value
            else:
                raise ConfigError(
                    f"inline configurations accept --set for {sorted(COMMON_DEFAULTS)}, got '{key}'"
                )

    def setup(self) -> ScenarioSetup:
        """
        Build the scenario setup this configuration describes.

        Raises:
            ConfigError: On an invalid inline description
            ScenarioError, OverrideError: For scenario configurations
        """
        if self.scenario is not None:
            overrides = dict(self.overrides)
            overrides.update(self.settings)
            if self.seed is not None:
                overrides["seed"] = self.seed
            if "amplitude" in self.initial:
                overrides["amplitude"] = self.initial["amplitude"]
            if "profile" in self.initial:
                overrides["initial"] = self.initial["profile"]
            return build_scenario(self.scenario, overrides)
        return self._inline_setup()

    def _inline_setup(self) -> ScenarioSetup:
        try:
            model = _model_from_config(self.model)
            feedback = _feedback_from_config(self.feedback, model.n_ports)
            ports = FeedbackPorts(
                input_projection=self.ports.get("input_projection"),
                output_projection=self.ports.get("output_projection"),
            )
            sector = None
            if self.sector is not None:
                sector = SectorCheck(
                    monotone_from_config(self.sector["map"]) if "map" in self.sector else feedback,
                    float(self.sector["kappa"]),
                    self.sector.get("v_local"),
                )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid inline configuration: {e}") from e

        profile = self.profile or ("N1" if model.N == 1 else "N2")
        parts = ScenarioParts(model=model, feedback=feedback, ports=ports, sector=sector)
        defaults = {
            k: v for k, v in self.settings.items() if k not in COMMON_DEFAULTS
        }
        if self.tag == "conservative":
            defaults["dissipation"] = 0.0
        scenario = Scenario(
            name=self.name or model.name,
            description="inline configuration",
            provenance=self.source or "inline",
            tag=self.tag,
            profile=profile,
            build=lambda _params: parts,
            defaults=defaults,
            components=tuple(int(i) for i in self.initial.get("components", (0,))),
        )
        overrides = {k: v for k, v in self.settings.items() if k in COMMON_DEFAULTS}
        if self.seed is not None:
            overrides["seed"] = self.seed
        if "amplitude" in self.initial:
            overrides["amplitude"] = self.initial["amplitude"]
        if "profile" in self.initial:
            overrides["initial"] = self.initial["profile"]
        try:
            params = resolve_parameters(scenario, overrides)
        except OverrideError as e:
            raise ConfigError(str(e)) from e
        min_cells = 8 * model.N
        if params["n_cells"] < min_cells:
            raise ConfigError(f"n_cells must be >= {min_cells}, got {params['n_cells']}")
        return ScenarioSetup(scenario=scenario, params=params, parts=parts)

    def solver_options(self) -> Dict[str, Any]:
        options: Dict[str, Any] = {}
        if self.tol is not None:
            options["tol"] = float(self.tol)
        if self.max_iter is not None:
            options["max_iter"] = int(self.max_iter)
        return options


def load_config(path: Union[str, Path]) -> RunConfig:
    """
    Read a JSON configuration file.

    Raises:
        ConfigError: If the file cannot be read or parsed, or is invalid
    """
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read configuration {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e
    logger.debug("loaded configuration %s", path)
    return RunConfig.from_dict(data, source=str(path))
