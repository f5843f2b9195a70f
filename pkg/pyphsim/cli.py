#!/usr/bin/env python3
"""
Command-line front end.

Subcommands:
    run       simulate a configuration, write trace.csv and summary.json
    check     evaluate the stability conditions, print them as JSON
    transfer  evaluate G(lambda) at given points, write transfer.csv
    sweep     run one parameter over several values
    list      show the scenario catalog

Exit codes:
    0  success
    1  configuration, profile or input error
    2  inner solver did not converge
    3  a condition failed (check) or Re G(lambda) is not positive (transfer)

Example:
    $ pyphsim run --scenario wave-sector-damper --seed 7 --out out/wave
    $ pyphsim check --scenario order2-damped --set H_rate=3
    $ pyphsim transfer --config configs/wave_static.json --lambda 1 --lambda 2+1j
"""

import argparse
import copy
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, NoReturn, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import RunConfig, load_config, parse_complex, parse_setting
from .core.errors import (
    ConfigError,
    NonConvergenceError,
    PhsError,
    ProfileMismatchError,
    UndefinedFitError,
)
from .core.stability import PROFILES, estimate_decay
from .core.transfer import transfer_at
from .scenarios.catalog import ScenarioSetup, condition_reports, list_scenarios

logger = logging.getLogger(__name__)

SUMMARY_SCHEMA = 1

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NONCONVERGENCE = 2
EXIT_CONDITION = 3

DEFAULT_OUT = "out"


def _jsonable(value: Any) -> Any:
    """Replace non-finite floats so the output stays strict JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def dump_json(obj: Any) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(path: Path, obj: Any) -> None:
    path.write_text(dump_json(obj), encoding="utf-8")
    logger.info("wrote %s", path)


def _error(message: str) -> None:
    print(f"[error] {message}", file=sys.stderr)


# ============================================================================
# Argument parsing
# ============================================================================

class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors surface as ConfigError (exit code 1)."""

    def error(self, message: str) -> NoReturn:
        raise ConfigError(f"{self.prog}: {message}")


def _add_source_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--scenario", help="catalog scenario name")
    p.add_argument(
        "--set", dest="settings", action="append", default=[], metavar="KEY=VALUE",
        help="override a parameter (repeatable); values are read as JSON when possible",
    )
    p.add_argument("--seed", type=int, help="seed for sampled data")
    p.add_argument("--out", help=f"output directory (default: config 'out' or '{DEFAULT_OUT}')")


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = CliParser(
        prog="pyphsim",
        description="Port-Hamiltonian boundary control simulator and stability checks.",
    )
    parser.add_argument(
        "-v", "--verbose", action="count", default=0,
        help="log more (-v info, -vv debug)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate and write trace.csv, summary.json")
    _add_source_args(p_run)
    p_run.add_argument("--states", action="store_true", help="also write states.npy")

    p_check = sub.add_parser("check", help="evaluate the stability conditions")
    _add_source_args(p_check)
    p_check.add_argument(
        "--profile", type=str.upper, choices=PROFILES,
        help="stability profile (n1, n2, eb); defaults to the configuration's",
    )

    p_transfer = sub.add_parser("transfer", help="evaluate G(lambda), write transfer.csv")
    _add_source_args(p_transfer)
    p_transfer.add_argument(
        "--lambda", dest="lambdas", action="append", default=[], metavar="LAMBDA",
        help="evaluation point with Re > 0, e.g. 1 or 2+1j (repeatable, default 1)",
    )

    p_sweep = sub.add_parser("sweep", help="run one parameter over several values")
    _add_source_args(p_sweep)
    p_sweep.add_argument("--param", help="parameter to sweep (overrides the config's sweep)")
    p_sweep.add_argument("--values", help="comma-separated values for --param")
    p_sweep.add_argument("--jobs", type=int, default=1, help="concurrent runs (default 1)")

    p_list = sub.add_parser("list", help="show the scenario catalog")
    p_list.add_argument("--json", action="store_true", help="print the catalog as JSON")

    return parser.parse_args(argv)


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """
    Build the RunConfig from --config or --scenario, then apply --set and --seed.

    Raises:
        ConfigError: If not exactly one source is given or an override is malformed
    """
    if args.config and args.scenario:
        raise ConfigError("give either --config or --scenario, not both")
    if args.config:
        config = load_config(args.config)
    elif args.scenario:
        config = RunConfig.for_scenario(args.scenario)
    else:
        raise ConfigError("give --config FILE or --scenario NAME")
    config.apply_settings([parse_setting(s) for s in args.settings])
    if args.seed is not None:
        config.seed = args.seed
    return config


def _out_dir(args: argparse.Namespace, config: RunConfig) -> Path:
    out = Path(args.out or config.out or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ============================================================================
# Commands
# ============================================================================

def execute_run(
    setup: ScenarioSetup,
    config: RunConfig,
    out: Path,
    record_states: bool = False,
    echo: bool = False
) -> Dict[str, Any]:
    """
    Run one setup and write its trace.csv and summary.json into `out`;
    with echo the trace summary is also printed.

    Returns:
        The summary written

    Raises:
        NonConvergenceError: If an inner solve hits its cap
    """
    loop = setup.loop(**config.solver_options())
    seed = setup.params["seed"]
    trace = loop.run(seed=seed, record_states=record_states)
    out.mkdir(parents=True, exist_ok=True)
    trace.to_csv(out / "trace.csv")
    if echo:
        trace.print_summary()
    if record_states and trace.states is not None:
        np.save(out / "states.npy", trace.states)

    try:
        fit = estimate_decay(trace, config.window_fraction)
        decay: Dict[str, Any] = fit.to_dict()
    except UndefinedFitError as e:
        logger.warning("decay fit undefined: %s", e)
        decay = {"M_hat": None, "omega_hat": None, "fit_quality": None, "reason": str(e)}

    conditions = [r.to_dict() for r in setup.conditions()]
    E = trace.E_total
    summary = {
        "schema": SUMMARY_SCHEMA,
        "scenario": setup.scenario.name,
        "tag": setup.scenario.tag,
        "profile": setup.scenario.profile,
        "parameters": dict(setup.params),
        "seed": seed,
        "omega_hat": decay["omega_hat"],
        "M_hat": decay["M_hat"],
        "fit_quality": decay["fit_quality"],
        "decay": decay,
        "energy": {
            "initial": float(E[0]),
            "final": float(E[-1]),
            "max_power_residual": loop.stats["max_power_residual"],
        },
        "conditions": conditions,
        "conditions_passed": all(c["passed"] for c in conditions),
        "solver": dict(loop.stats),
    }
    write_json(out / "summary.json", summary)
    return summary


def cmd_run(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    setup = config.setup()
    out = _out_dir(args, config)
    summary = execute_run(
        setup, config, out,
        record_states=args.states or config.emit_states,
        echo=args.verbose > 0,
    )
    omega = summary["omega_hat"]
    print(
        f"[ok] {setup.scenario.name}: omega_hat="
        f"{'undefined' if omega is None else format(omega, '.6g')}, "
        f"{summary['solver']['iterations_total']} inner iterations -> {out}"
    )
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    setup = config.setup()
    profile = args.profile or setup.scenario.profile
    reports = condition_reports(
        setup.model, setup.parts.feedback, setup.parts.ports, profile,
        sector=setup.parts.sector, seed=setup.params["seed"],
    )
    passed = all(r.passed for r in reports)
    payload = {
        "schema": SUMMARY_SCHEMA,
        "scenario": setup.scenario.name,
        "profile": profile,
        "passed": passed,
        "conditions": [r.to_dict() for r in reports],
    }
    print(dump_json(payload), end="")
    if args.out or config.out:
        write_json(_out_dir(args, config) / "check.json", payload)
    for r in reports:
        if not r.passed:
            _error(f"condition '{r.name}' failed: {r.lhs:.6g} vs threshold {r.threshold:.6g}")
    return EXIT_OK if passed else EXIT_CONDITION


def cmd_transfer(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    lambdas = [parse_complex(v) for v in args.lambdas] or config.lambdas or [1.0 + 0.0j]
    for lam in lambdas:
        if not lam.real > 0.0:
            _error(f"lambda must have Re > 0, got {lam}")
            return EXIT_CONFIG
    setup = config.setup()
    rows = [transfer_at(setup.model, lam).to_row() for lam in lambdas]
    table = pd.DataFrame(rows)
    out = _out_dir(args, config)
    table.to_csv(out / "transfer.csv", index=False, lineterminator="\n", float_format="%.17g")
    logger.info("wrote %s", out / "transfer.csv")
    print(table.to_string(index=False))
    worst = float(table["min_sym_eig"].min())
    if worst <= 0.0:
        _error(f"Re G(lambda) is not positive definite (min_sym_eig={worst:.6g})")
        return EXIT_CONDITION
    return EXIT_OK


def _sweep_plan(args: argparse.Namespace, config: RunConfig) -> Tuple[str, List[Any]]:
    if args.param:
        if not args.values:
            raise ConfigError("--param needs --values")
        values = [parse_setting(f"v={v}")[1] for v in args.values.split(",")]
        return args.param, values
    if config.sweep is None:
        raise ConfigError("sweep needs a 'sweep' section in the config or --param/--values")
    return str(config.sweep["parameter"]), list(config.sweep["values"])


def _sweep_job(config: RunConfig, parameter: str, value: Any, out: Path) -> Dict[str, Any]:
    row: Dict[str, Any] = {"parameter": parameter, "value": value, "directory": out.name}
    try:
        setup = config.setup()
        summary = execute_run(setup, config, out)
    except NonConvergenceError as e:
        logger.error("sweep %s=%r did not converge: %s", parameter, value, e)
        row.update(status="nonconvergence", exit_code=EXIT_NONCONVERGENCE)
        return row
    except PhsError as e:
        logger.error("sweep %s=%r rejected: %s", parameter, value, e)
        row.update(status="config-error", exit_code=EXIT_CONFIG)
        return row
    row.update(
        status="ok",
        exit_code=EXIT_OK,
        omega_hat=summary["omega_hat"],
        M_hat=summary["M_hat"],
        fit_quality=summary["fit_quality"],
        E_initial=summary["energy"]["initial"],
        E_final=summary["energy"]["final"],
        iterations_total=summary["solver"]["iterations_total"],
        conditions_passed=summary["conditions_passed"],
    )
    return row


def cmd_sweep(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    parameter, values = _sweep_plan(args, config)
    if args.jobs < 1:
        _error(f"--jobs must be >= 1, got {args.jobs}")
        return EXIT_CONFIG
    out = _out_dir(args, config)

    jobs = []
    for i, value in enumerate(values):
        job_config = copy.deepcopy(config)
        job_config.apply_settings([(parameter, value)])
        jobs.append((job_config, value, out / f"{i:03d}_{parameter}={value}"))

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        futures = [pool.submit(_sweep_job, c, parameter, v, d) for c, v, d in jobs]
        rows = [f.result() for f in futures]

    table = pd.DataFrame(rows)
    table.to_csv(out / "sweep.csv", index=False, lineterminator="\n", float_format="%.17g")
    logger.info("wrote %s", out / "sweep.csv")
    print(table.to_string(index=False))
    return max(int(r["exit_code"]) for r in rows)


def cmd_list(args: argparse.Namespace) -> int:
    entries = list_scenarios()
    if args.json:
        print(dump_json(entries), end="")
        return EXIT_OK
    width = max(len(e["name"]) for e in entries)
    for e in entries:
        print(f"{e['name']:<{width}}  {e['profile']:<3} {e['tag']:<18} {e['description']}")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "check": cmd_check,
    "transfer": cmd_transfer,
    "sweep": cmd_sweep,
    "list": cmd_list,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except ConfigError as e:
        _error(str(e))
        return EXIT_CONFIG
    _configure_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except NonConvergenceError as e:
        _error(f"inner solver did not converge: {e}")
        return EXIT_NONCONVERGENCE
    except ProfileMismatchError as e:
        _error(f"profile mismatch: {e}")
        return EXIT_CONFIG
    except (PhsError, ValueError) as e:
        _error(str(e))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
