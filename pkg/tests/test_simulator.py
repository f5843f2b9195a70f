"""
Tests for the closed-loop simulator

Tests:
- solve_port_inclusion against closed forms (zero, linear, relay) and bisection
- ClosedLoop stepping: equilibrium, energy conservation and decay
- Pairwise contraction and the backward Euler difference quotient
- Dynamic feedback through a collocated controller
- contraction_resolve against the direct resolvent
"""

import numpy as np
import pytest
import scipy.optimize

from pyphsim.blocks.controller import create_collocated_controller
from pyphsim.blocks.monotone import LinearMap, Relay, ZeroMap
from pyphsim.core.discrete import build_discrete, discrete_io_maps
from pyphsim.core.errors import DimensionError
from pyphsim.core.initial import InitialDatum
from pyphsim.core.rng import make_rng
from pyphsim.core.simulator import ClosedLoop, contraction_resolve, solve_port_inclusion
from pyphsim.scenarios.models import transport_model, wave_model


@pytest.fixture
def wave_system():
    return build_discrete(wave_model(), 32)


# ==============================================================================
# Port inclusion
# ==============================================================================

def test_zero_feedback_leaves_ports_open(wave_system):
    maps = discrete_io_maps(wave_system, 1.0 / 256)
    f = make_rng(1).standard_normal(wave_system.size)
    y, u, x = solve_port_inclusion(maps, ZeroMap(2), f)
    assert not np.any(u)
    np.testing.assert_allclose(y, maps.F @ f, atol=1e-14)
    np.testing.assert_allclose(x, maps.phi(f), atol=1e-14)


def test_linear_feedback_matches_dense_solve(wave_system):
    maps = discrete_io_maps(wave_system, 1.0 / 128)
    f = make_rng(2).standard_normal(wave_system.size)
    K = np.diag([2.0, 0.5])
    sol = solve_port_inclusion(maps, LinearMap(K), f, tol=1e-13)
    expected = np.linalg.solve(maps.G_inv + K, maps.G_inv @ maps.F @ f)
    np.testing.assert_allclose(sol.y, expected, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(sol.u, -K @ sol.y, rtol=1e-8, atol=1e-10)
    assert sol.iterations > 0


def test_relay_on_scalar_transport():
    sys = build_discrete(transport_model(), 32)
    maps = discrete_io_maps(sys, 0.05)
    f = make_rng(3).standard_normal(sys.size)
    a = float((maps.F @ f)[0])
    g = float(maps.G[0, 0])

    # stuck: |a| <= g F gives y = 0, u = -a/g
    stuck = solve_port_inclusion(maps, Relay(level=2.0 * abs(a) / g), f)
    assert abs(stuck.y[0]) <= 1e-9
    assert stuck.u[0] == pytest.approx(-a / g, rel=1e-8)

    # sliding: y = a - g F sign(a), u = -F sign(a)
    level = 0.5 * abs(a) / g
    sliding = solve_port_inclusion(maps, Relay(level=level), f)
    assert sliding.y[0] == pytest.approx(a - g * level * np.sign(a), rel=1e-8)
    assert sliding.u[0] == pytest.approx(-level * np.sign(a), rel=1e-8)
    assert sliding.graph_residual <= 1e-9


def test_relay_inclusion_matches_bisection_on_random_data():
    sys = build_discrete(transport_model(), 32)
    maps = discrete_io_maps(sys, 0.05)
    g = float(maps.G[0, 0])
    rng = make_rng(8)
    stuck = 0
    for _ in range(100):
        f = rng.standard_normal(sys.size)
        a = float((maps.F @ f)[0])
        level = rng.uniform(0.2, 2.0) * abs(a) / g
        viscous = rng.uniform(0.0, 1.0)
        # y + g (level sign(y) + viscous y) = a changes sign once
        def defect(y):
            return y + g * (level * np.sign(y) + viscous * y) - a
        bound = abs(a) + 1.0
        y_ref = scipy.optimize.bisect(defect, -bound, bound, xtol=1e-14, maxiter=200)
        sol = solve_port_inclusion(maps, Relay(level=level, viscous=viscous), f)
        assert sol.y[0] == pytest.approx(y_ref, abs=1e-8)
        assert sol.u[0] == pytest.approx((y_ref - a) / g, abs=1e-8 * max(1.0, 1.0 / g))
        stuck += abs(y_ref) <= 1e-12
    assert 0 < stuck < 100


def test_relay_solution_satisfies_the_inclusion(wave_system):
    maps = discrete_io_maps(wave_system, 1.0 / 256)
    f = 3.0 * make_rng(4).standard_normal(wave_system.size)
    phi = Relay(level=[0.2, 0.5], viscous=[0.0, 1.0], n=2)
    sol = solve_port_inclusion(maps, phi, f)
    np.testing.assert_allclose(maps.output(f, sol.u), sol.y, atol=1e-9)
    np.testing.assert_allclose(maps.state(f, sol.u), sol.x, atol=1e-12)
    assert sol.graph_residual <= 1e-8


def test_port_inclusion_dimension_check(wave_system):
    maps = discrete_io_maps(wave_system, 0.01)
    with pytest.raises(DimensionError):
        solve_port_inclusion(maps, Relay(n=1), np.zeros(wave_system.size))


# ==============================================================================
# ClosedLoop
# ==============================================================================

def test_closed_loop_argument_checks(wave_system):
    with pytest.raises(DimensionError):
        ClosedLoop(wave_system, Relay(n=4))
    with pytest.raises(ValueError):
        ClosedLoop(wave_system, Relay(n=2), stepper="rk4")
    with pytest.raises(ValueError):
        ClosedLoop(wave_system, Relay(n=2), dt=0.0)
    with pytest.raises(TypeError):
        ClosedLoop(wave_model(), Relay(n=2))


def test_step_keeps_equilibrium(wave_system):
    loop = ClosedLoop(wave_system, Relay(level=1.0, n=2), dt=1.0 / 64, T=0.25)
    x_next, xc_next, record, _ = loop.step(np.zeros(wave_system.size))
    assert not np.any(x_next)
    assert xc_next.size == 0
    assert record.power_residual == 0.0


def test_zero_initial_datum_gives_zero_trace(wave_system):
    loop = ClosedLoop(wave_system, Relay(level=1.0, n=2), dt=1.0 / 64, T=0.25,
                      initial=InitialDatum("zero"))
    trace = loop.run(seed=0)
    assert not np.any(trace.E_total)
    assert not np.any(trace.u) and not np.any(trace.y)
    assert loop.stats["steps"] == 16


def test_conservative_midpoint_preserves_energy(wave_system):
    loop = ClosedLoop(wave_system, ZeroMap(2), dt=1.0 / 128, T=1.0)
    trace = loop.run(seed=0)
    E = trace.E_total
    assert E[0] > 0.0
    assert np.max(np.abs(E - E[0])) <= 1e-11 * E[0]
    assert trace.power_residual.max() <= 1e-9


def test_relay_feedback_dissipates(wave_system):
    loop = ClosedLoop(wave_system, Relay(level=0.5, n=2), dt=1.0 / 128, T=1.0)
    trace = loop.run(seed=0)
    E = trace.E_total
    assert np.all(np.diff(E) <= 1e-12 * E[0])
    assert E[-1] < E[0]
    assert trace.power_residual.max() <= 1e-8
    assert loop.stats["energy_increase_steps"] == 0
    assert trace.metadata["stepper"] == "midpoint"


def test_trajectories_contract_pairwise(wave_system):
    loop = ClosedLoop(wave_system, Relay(level=0.3, viscous=0.5, n=2), dt=1.0 / 128, T=0.5)
    datum = InitialDatum("random-bumps", amplitude=0.5, components=(0, 1))
    x1, _ = datum.sample(wave_system, seed=1)
    x2, _ = datum.sample(wave_system, seed=2)
    s1 = loop.run(x1, record_states=True).states
    s2 = loop.run(x2, record_states=True).states
    gaps = np.array([wave_system.norm(a - b) for a, b in zip(s1, s2)])
    assert np.all(np.diff(gaps) <= 1e-8 * gaps[0])


def test_backward_euler_difference_quotient_decreases(wave_system):
    loop = ClosedLoop(wave_system, Relay(level=0.5, n=2), stepper="backward-euler",
                      dt=1.0 / 64, T=1.0)
    trace = loop.run(seed=0)
    assert trace.diffquot_norm[0] == 0.0
    q = trace.diffquot_norm[1:]
    assert np.all(np.diff(q) <= 1e-8 * q[0])
    assert np.all(np.diff(trace.E_total) <= 1e-12 * trace.E_total[0])
    assert loop.tau == loop.dt


def test_collocated_controller_dissipates_total_energy(wave_system):
    ctrl = create_collocated_controller(2)
    initial = InitialDatum("bump", controller_amplitude=0.1)
    loop = ClosedLoop(wave_system, ctrl, dt=1.0 / 128, T=1.0, initial=initial)
    assert loop.is_dynamic and loop.n_c == 2
    trace = loop.run(seed=5)
    E = trace.E_total
    assert trace.E_controller[0] > 0.0
    assert np.all(np.diff(E) <= 1e-10 * E[0])
    assert E[-1] < 0.9 * E[0]
    assert trace.power_residual.max() <= 1e-7


def test_controller_state_length_is_checked(wave_system):
    loop = ClosedLoop(wave_system, create_collocated_controller(2), T=0.1)
    with pytest.raises(DimensionError):
        loop.run(np.zeros(wave_system.size), xc0=np.zeros(3))


# ==============================================================================
# contraction_resolve
# ==============================================================================

def test_contraction_resolve_unit_density_is_direct():
    sys = build_discrete(wave_model(), 24)
    f = make_rng(6).standard_normal(sys.size)
    sol = contraction_resolve(sys, Relay(level=0.5, n=2), f, tau=0.05)
    assert (sol.iterations, sol.order, sol.rho) == (0, 0, 0.0)
    direct = solve_port_inclusion(discrete_io_maps(sys, 0.05), Relay(level=0.5, n=2), f)
    np.testing.assert_allclose(sol.x, direct.x, atol=1e-10)


def test_contraction_resolve_matches_direct_resolvent():
    # H = diag(1.2, 0.9)
    sys = build_discrete(wave_model(rho=1.0 / 1.2, EI=0.9), 24)
    f = make_rng(7).standard_normal(sys.size)
    phi = Relay(level=0.5, n=2)
    sol = contraction_resolve(sys, phi, f, tau=0.05)
    assert sol.order == 1
    assert sol.rho == pytest.approx(0.2 / 0.9)
    direct = solve_port_inclusion(discrete_io_maps(sys, 0.05), phi, f)
    np.testing.assert_allclose(sol.x, direct.x, rtol=1e-7, atol=1e-8)


def test_contraction_resolve_nests_for_large_density():
    # H = 5 I needs a fourth root to come within 1/2 of I
    sys = build_discrete(wave_model(rho=0.2, EI=5.0), 16)
    f = make_rng(8).standard_normal(sys.size)
    sol = contraction_resolve(sys, ZeroMap(2), f, tau=0.05, tol=1e-11)
    assert sol.order == 4
    assert sol.rho < 1.0
    direct = discrete_io_maps(sys, 0.05).phi(f)
    np.testing.assert_allclose(sol.x, direct, rtol=1e-6, atol=1e-7)
