"""
Long closed-loop runs

Tests:
- Power balance of midpoint stepping over 10^4 steps on 128 cells
- Energy conservation of the undamped wave over a long horizon
- Pairwise contraction on 10 random pairs in four presets
- Exponential decay under the sector damper and its grid stability
- Lyapunov descent along the decaying run
- Saturating damper: energy decay without a global sector bound
- Backward Euler difference quotient over 10^3 steps

Deselect with: pytest -m "not slow"
"""

import numpy as np
import pytest

from pyphsim.blocks.monotone import verify_sector
from pyphsim.core.initial import InitialDatum
from pyphsim.core.stability import (
    descent_time,
    estimate_decay,
    lyapunov_functional,
    lyapunov_series,
    multiplier_for_model,
)
from pyphsim.scenarios.catalog import build_scenario, instantiate

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def sector_runs():
    """wave-sector-damper at T = 20 on 128 (with states) and 256 cells."""
    runs = {}
    for n_cells in (128, 256):
        setup = build_scenario("wave-sector-damper", {"T": 20.0, "n_cells": n_cells})
        trace = setup.loop().run(seed=0, record_states=n_cells == 128)
        runs[n_cells] = (setup, trace)
    return runs


# ==============================================================================
# Energy accounting
# ==============================================================================

def test_midpoint_power_balance_over_ten_thousand_steps():
    loop, _ = instantiate(
        "wave-relay-damper", {"n_cells": 128, "dt": 1.0 / 1024, "T": 10_000 / 1024}
    )
    assert loop.n_steps == 10_000
    trace = loop.run(seed=1)
    E0 = trace.E_total[0]
    assert trace.power_residual.max() <= max(1e-10, 1e-8 * E0)
    assert np.all(np.diff(trace.E_total) <= 1e-12 * E0)


def test_conservative_wave_long_horizon():
    loop, tag = instantiate("wave-neumann-conservative", {"T": 10.0, "n_cells": 128})
    assert tag == "conservative"
    assert loop.system.dissipation == 0.0
    E = loop.run(seed=0).E_total
    assert abs(E[-1] - E[0]) <= 1e-9 * E[0]


# ==============================================================================
# Contraction
# ==============================================================================

@pytest.mark.parametrize("name", [
    "wave-sector-damper",
    "wave-relay-damper",
    "wave-saturating-damper",
    "wave-collocated",
])
def test_random_pairs_contract(name):
    loop = build_scenario(name, {"T": 1.0}).loop()
    system = loop.system
    datum = InitialDatum("random-bumps", amplitude=0.5, components=(0, 1),
                         controller_amplitude=0.1 if loop.is_dynamic else 0.0)
    for pair in range(10):
        x1, c1 = datum.sample(system, loop.n_c, seed=2 * pair)
        x2, c2 = datum.sample(system, loop.n_c, seed=2 * pair + 1)
        t1 = loop.run(x1, c1, record_states=True)
        t2 = loop.run(x2, c2, record_states=True)
        gaps = np.array([system.inner(a - b, a - b) for a, b in zip(t1.states, t2.states)])
        if loop.is_dynamic:
            gaps += np.array([
                2.0 * loop.controller_energy(a - b)
                for a, b in zip(t1.controller_states, t2.controller_states)
            ])
        gaps = np.sqrt(gaps)
        assert gaps[0] > 0.0
        assert np.all(np.diff(gaps) <= 1e-9 * gaps[0]), f"{name}, pair {pair}"


# ==============================================================================
# Decay
# ==============================================================================

def test_sector_damper_decays_exponentially(sector_runs):
    rates = {}
    for n_cells, (setup, trace) in sector_runs.items():
        assert setup.scenario.tag == "exponential-decay"
        assert setup.system.dissipation > 0.0
        fit = estimate_decay(trace)
        assert fit.omega_hat < -0.01
        assert fit.fit_quality >= 0.99
        assert trace.power_residual.max() <= max(1e-10, 1e-8 * trace.E_total[0])
        rates[n_cells] = fit.omega_hat
    assert abs(rates[256] - rates[128]) <= 0.2 * abs(rates[128])


def test_lyapunov_descent_along_the_decaying_run(sector_runs):
    setup, trace = sector_runs[128]
    eta = multiplier_for_model(setup.model)
    sector = setup.parts.sector
    kappa_tilde = verify_sector(sector.phi, sector.kappa, seed=0).kappa_tilde
    assert kappa_tilde == pytest.approx(0.25)
    t0 = descent_time(eta, kappa_tilde)
    assert 0.0 < t0 < trace.times[-1]
    functional = lyapunov_functional(setup.system, "N1", eta)
    series = lyapunov_series(setup.system, functional, trace, t0=t0)
    assert np.isfinite(series.max_increase)
    assert series.max_increase <= 1e-8 * trace.E_total[0]


def test_saturating_damper_decays_without_global_sector():
    setup = build_scenario("wave-saturating-damper", {"T": 20.0})
    assert setup.scenario.tag == "asymptotic-only"
    reports = {r.name: r for r in setup.conditions(seed=0)}
    assert not reports["sector"].passed
    assert reports["sector[|v|<=1]"].passed
    E = setup.loop().run(seed=0).E_total
    assert np.all(np.diff(E) <= 1e-12 * E[0])
    assert np.min(E / E[0]) <= 1e-3


def test_backward_euler_difference_quotient_over_a_thousand_steps():
    loop, _ = instantiate("wave-relay-damper", {"stepper": "backward-euler", "T": 1000 / 256})
    assert loop.n_steps == 1000
    q = loop.run(seed=0).diffquot_norm[1:]
    assert q[0] > 0.0
    assert np.all(q[1:] <= q[:-1] * (1.0 + 1e-9))
