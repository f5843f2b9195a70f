"""
Tests for the command-line front end

Tests:
- run: outputs, decay summary, determinism, error exit codes
- check: condition exit codes and profile override
- transfer: G(lambda) table and domain errors
- sweep and list
"""

import json
from pathlib import Path

import pandas as pd
import pytest

from pyphsim.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write_config(path: Path, data: dict) -> str:
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def read_summary(out: Path) -> dict:
    return json.loads((out / "summary.json").read_text(encoding="utf-8"))


# ==============================================================================
# run
# ==============================================================================

def test_run_conservative_scenario(tmp_path, capsys):
    code = main(["run", "--scenario", "wave-neumann-conservative",
                 "--set", "T=0.5", "--set", "n_cells=32", "--out", str(tmp_path)])
    assert code == 0
    assert "[ok]" in capsys.readouterr().out
    summary = read_summary(tmp_path)
    assert abs(summary["omega_hat"]) <= 1e-6
    assert summary["tag"] == "conservative"
    assert summary["energy"]["initial"] == pytest.approx(summary["energy"]["final"], rel=1e-10)
    assert not summary["conditions_passed"]
    trace = pd.read_csv(tmp_path / "trace.csv")
    assert list(trace.columns[:5]) == ["t", "E_state", "E_ctrl", "power_residual", "diffquot_norm"]
    assert len(trace) == 129


def test_run_is_deterministic(tmp_path):
    args = ["run", "--scenario", "wave-sector-damper", "--seed", "7",
            "--set", "T=0.25", "--set", "n_cells=32"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    first = (tmp_path / "a" / "trace.csv").read_bytes()
    assert first == (tmp_path / "b" / "trace.csv").read_bytes()
    assert read_summary(tmp_path / "a")["seed"] == 7


def test_run_writes_states_and_reports_undefined_fit(tmp_path):
    code = main(["run", "--scenario", "wave-relay-damper", "--states",
                 "--set", "T=0.05", "--set", "n_cells=16", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "states.npy").exists()
    summary = read_summary(tmp_path)
    # 13 steps leave fewer than 32 samples in the fit window
    assert summary["omega_hat"] is None
    assert "reason" in summary["decay"]


def test_run_inline_configuration(tmp_path):
    code = main(["run", "--config", str(CONFIGS / "wave_static.json"),
                 "--set", "T=0.5", "--set", "n_cells=32", "--out", str(tmp_path)])
    assert code == 0
    summary = read_summary(tmp_path)
    assert summary["scenario"] == "wave-static-damper"
    assert summary["seed"] == 7
    assert summary["conditions_passed"]
    assert summary["energy"]["final"] < summary["energy"]["initial"]


def test_run_rejects_scenario_and_model_together(tmp_path):
    config = write_config(tmp_path / "both.json", {
        "scenario": "wave-sector-damper",
        "model": {"builder": "wave"},
    })
    assert main(["run", "--config", config, "--out", str(tmp_path)]) == 1


@pytest.mark.parametrize("argv", [
    ["run", "--scenario", "no-such-scenario"],
    ["run", "--scenario", "wave-sector-damper", "--set", "kappa=abc"],
    ["run", "--scenario", "wave-sector-damper", "--set", "nokey"],
    ["run", "--config", "does/not/exist.json"],
    ["run"],
    ["run", "--config", str(CONFIGS / "wave_static.json"), "--set", "kappa=2"],
])
def test_run_configuration_errors(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)]) == 1


def test_run_reports_nonconvergence(tmp_path):
    config = write_config(tmp_path / "capped.json", {
        "scenario": "wave-relay-damper",
        "overrides": {"T": 0.5, "n_cells": 16},
        "solver": {"max_iter": 1},
    })
    assert main(["run", "--config", config, "--out", str(tmp_path)]) == 2


def test_both_sources_on_the_command_line_is_a_config_error(tmp_path, capsys):
    config = str(CONFIGS / "wave_static.json")
    code = main(["run", "--config", config, "--scenario", "wave-sector-damper",
                 "--out", str(tmp_path)])
    assert code == 1
    assert "not both" in capsys.readouterr().err
    assert not (tmp_path / "trace.csv").exists()


@pytest.mark.parametrize("argv", [
    ["run", "--scenario", "wave-sector-damper", "--bogus"],
    ["check", "--scenario", "order2-damped", "--profile", "n3"],
    ["run", "--scenario", "wave-sector-damper", "--seed", "seven"],
    [],
])
def test_usage_errors_exit_with_config_code(argv):
    assert main(argv) == 1


def test_verbose_run_prints_the_trace_summary(tmp_path, capsys):
    code = main(["-v", "run", "--scenario", "wave-sector-damper",
                 "--set", "T=0.25", "--set", "n_cells=16", "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "Energy trace: wave-sector-damper" in out
    assert "Max power residual" in out
    assert "[ok] wave-sector-damper" in out


# ==============================================================================
# check
# ==============================================================================

def test_check_passes_for_damped_beam(capsys):
    assert main(["check", "--scenario", "eb-beam-damped"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["passed"]
    assert payload["profile"] == "EB"


def test_check_fails_for_steep_order2_density(tmp_path, capsys):
    assert main(["check", "--scenario", "order2-damped", "--set", "H_rate=3",
                 "--out", str(tmp_path)]) == 3
    payload = json.loads(capsys.readouterr().out)
    failed = [c["name"] for c in payload["conditions"] if not c["passed"]]
    assert failed == ["order2"]
    assert json.loads((tmp_path / "check.json").read_text(encoding="utf-8")) == payload


def test_check_profile_mismatch():
    assert main(["check", "--scenario", "wave-sector-damper", "--profile", "n2"]) == 1


# ==============================================================================
# transfer
# ==============================================================================

def test_transfer_unit_wave(tmp_path):
    code = main(["transfer", "--scenario", "wave-neumann-conservative",
                 "--lambda", "1", "--lambda", "2+1j", "--out", str(tmp_path)])
    assert code == 0
    table = pd.read_csv(tmp_path / "transfer.csv")
    assert len(table) == 2
    assert table.loc[0, "G_1_1_re"] == pytest.approx(1.313035, abs=1e-6)
    assert table.loc[0, "G_1_2_re"] == pytest.approx(0.850918, abs=1e-6)
    assert (table["min_sym_eig"] > 0.0).all()


def test_transfer_uses_config_lambdas(tmp_path):
    code = main(["transfer", "--config", str(CONFIGS / "wave_static.json"), "--out", str(tmp_path)])
    assert code == 0
    table = pd.read_csv(tmp_path / "transfer.csv")
    assert list(table["lambda_im"]) == [0.0, 1.0, -3.0]


def test_transfer_rejects_left_half_plane(tmp_path):
    assert main(["transfer", "--scenario", "wave-neumann-conservative",
                 "--lambda=-1", "--out", str(tmp_path)]) == 1


# ==============================================================================
# sweep and list
# ==============================================================================

def test_sweep_over_kappa(tmp_path):
    code = main(["sweep", "--scenario", "wave-sector-damper", "--set", "T=0.1",
                 "--set", "n_cells=16", "--param", "kappa", "--values", "1.5,2",
                 "--jobs", "2", "--out", str(tmp_path)])
    assert code == 0
    table = pd.read_csv(tmp_path / "sweep.csv")
    assert list(table["status"]) == ["ok", "ok"]
    assert list(table["value"]) == [1.5, 2.0]
    assert (tmp_path / "000_kappa=1.5" / "summary.json").exists()
    assert (tmp_path / "001_kappa=2" / "trace.csv").exists()


def test_sweep_records_rejected_values(tmp_path):
    code = main(["sweep", "--scenario", "wave-sector-damper", "--set", "T=0.1",
                 "--set", "n_cells=16", "--param", "dt", "--values", "0.01,-1",
                 "--out", str(tmp_path)])
    assert code == 1
    table = pd.read_csv(tmp_path / "sweep.csv")
    assert list(table["status"]) == ["ok", "config-error"]


def test_sweep_needs_a_plan(tmp_path):
    assert main(["sweep", "--scenario", "wave-sector-damper", "--out", str(tmp_path)]) == 1


def test_list(capsys):
    assert main(["list"]) == 0
    assert "eb-beam-collocated" in capsys.readouterr().out
    assert main(["list", "--json"]) == 0
    entries = json.loads(capsys.readouterr().out)
    assert {e["name"] for e in entries} >= {"wave-sector-damper", "order2-damped"}
