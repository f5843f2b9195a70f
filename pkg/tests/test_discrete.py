"""
Tests for the SBP/SAT discretization

Tests:
- Grid checks and the SBP identity
- Free generator on constant states, discrete power balance
- Penalty structure: M-adjoint ports, lossless generator
- Resolvent io maps against the continuous transfer function
"""

import numpy as np
import pytest

from pyphsim.core.discrete import (
    build_discrete,
    discrete_io_maps,
    discrete_power_balance,
    sbp_dissipation,
    sbp_first_derivative,
    sbp_residual,
)
from pyphsim.core.errors import GridError
from pyphsim.core.model import create_model
from pyphsim.core.rng import make_rng
from pyphsim.core.transfer import transfer_at
from pyphsim.scenarios.models import beam_model, order2_model, wave_model


# ==============================================================================
# Grid
# ==============================================================================

def test_too_coarse_grids_are_rejected():
    with pytest.raises(GridError):
        build_discrete(wave_model(), 4)
    with pytest.raises(GridError):
        build_discrete(beam_model(), 8)


def test_sbp_identity():
    D1, w = sbp_first_derivative(100)
    assert w.sum() == pytest.approx(1.0)
    assert sbp_residual(D1, w) <= 1e-13
    assert build_discrete(wave_model(), 100).sbp_error <= 1e-13


def test_shapes_and_reshaping():
    sys = build_discrete(wave_model(), 32)
    assert sys.size == 66
    assert sys.n_ports == 2
    X = np.arange(66.0).reshape(33, 2)
    np.testing.assert_array_equal(sys.nodal(sys.flatten(X)), X)
    with pytest.raises(ValueError):
        sys.flatten(np.zeros(10))


def test_free_generator_vanishes_on_constants():
    sys = build_discrete(wave_model(), 40)
    x = sys.flatten(np.tile([0.3, -1.1], (41, 1)))
    np.testing.assert_allclose(sys.A_free @ x, 0.0, atol=1e-10)


# ==============================================================================
# Power balance
# ==============================================================================

def test_power_balance_zero_state():
    sys = build_discrete(wave_model(), 16)
    assert discrete_power_balance(sys, np.zeros(sys.size)) == (0.0, 0.0)


@pytest.mark.parametrize("factory", [wave_model, lambda: wave_model(EI_rate=1.0), beam_model])
def test_power_balance_is_exact_for_lossless_models(factory):
    sys = build_discrete(factory(), 48)
    rng = make_rng(3)
    for _ in range(5):
        x = rng.standard_normal(sys.size)
        lhs, rhs = discrete_power_balance(sys, x)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, sys.inner(x, x)) * sys.n_cells


def test_power_balance_gap_with_internal_damping():
    wave = wave_model()
    damped = create_model([-np.eye(2), wave.P[1]], np.eye(2), wave.W_B, wave.W_C)
    sys = build_discrete(damped, 32)
    x = make_rng(8).standard_normal(sys.size)
    lhs, rhs = discrete_power_balance(sys, x)
    assert lhs == pytest.approx(rhs - sys.inner(x, x), rel=1e-10, abs=1e-10)


def test_penalty_makes_ports_adjoint_and_generator_lossless():
    sys = build_discrete(wave_model(rho=2.0, EI=0.5), 32)
    np.testing.assert_allclose(sys.M @ sys.B, sys.C.T, atol=1e-12)
    rng = make_rng(4)
    for _ in range(5):
        x = rng.standard_normal(sys.size)
        assert abs(sys.internal_power(x)) <= 1e-9 * sys.inner(x, x) * sys.n_cells


def test_penalized_generator_dissipates_with_damping():
    sys = build_discrete(order2_model(damping=0.5), 24)
    x = make_rng(6).standard_normal(sys.size)
    assert sys.internal_power(x) < 0.0


# ==============================================================================
# Artificial dissipation
# ==============================================================================

def test_dissipation_operator_is_psd_and_spares_linear_functions():
    K = sbp_dissipation(16)
    np.testing.assert_allclose(K, K.T, atol=1e-12)
    assert np.linalg.eigvalsh(K)[0] >= -1e-12
    zeta = np.linspace(0.0, 1.0, 17)
    np.testing.assert_allclose(K @ (3.0 * zeta - 1.0), 0.0, atol=1e-12)
    checker = (-1.0) ** np.arange(17)
    assert checker @ K @ checker == pytest.approx(15 * 16.0)


def test_dissipation_damps_the_grid_mode_the_central_scheme_keeps():
    plain = build_discrete(wave_model(), 32)
    damped = build_discrete(wave_model(), 32, dissipation=0.1)
    assert plain.A_visc is None
    assert plain.artificial_power(np.ones(plain.size)) == 0.0
    X = np.zeros((33, 2))
    X[:, 0] = (-1.0) ** np.arange(33)
    x = damped.flatten(X)
    # central differences annihilate the interior of the checkerboard
    np.testing.assert_allclose(plain.nodal(plain.A_free @ x)[2:-2], 0.0, atol=1e-12)
    assert damped.artificial_power(x) < -0.1 * damped.inner(x, x) * damped.n_cells


def test_dissipative_generator_keeps_the_power_split():
    sys = build_discrete(wave_model(rho=2.0, EI=0.5), 32, dissipation=0.2)
    lossless = build_discrete(wave_model(rho=2.0, EI=0.5), 32)
    np.testing.assert_allclose(sys.A_free, lossless.A_free, atol=0.0)
    np.testing.assert_allclose(sys.M @ sys.B, sys.C.T, atol=1e-12)
    K = sbp_dissipation(32)
    rng = make_rng(12)
    for _ in range(5):
        x = rng.standard_normal(sys.size)
        z = np.einsum("jab,jb->ja", sys.H_nodes, sys.nodal(x))
        expected = -0.2 * np.einsum("jk,ja,ka->", K, z, z)
        assert expected < 0.0
        assert sys.artificial_power(x) == pytest.approx(expected, rel=1e-10)
        gap = abs(sys.internal_power(x) - expected)
        assert gap <= 1e-9 * sys.inner(x, x) * sys.n_cells


def test_negative_dissipation_is_rejected():
    with pytest.raises(ValueError):
        build_discrete(wave_model(), 16, dissipation=-0.1)


# ==============================================================================
# Resolvent io maps
# ==============================================================================

def test_io_maps_solve_the_resolvent_equation():
    sys = build_discrete(wave_model(), 32)
    maps = discrete_io_maps(sys, 0.25)
    rng = make_rng(9)
    f = rng.standard_normal(sys.size)
    u = rng.standard_normal(2)
    x = maps.state(f, u)
    np.testing.assert_allclose(x - 0.25 * (sys.A @ x + sys.B @ u), f, atol=1e-10)
    np.testing.assert_allclose(maps.output(f, u), sys.C @ x, atol=1e-10)
    assert not np.any(maps.state(np.zeros(sys.size), np.zeros(2)))


def test_io_maps_positivity_and_metric():
    maps = discrete_io_maps(build_discrete(beam_model(), 24), 1.0 / 512)
    assert maps.min_sym_eig > 0.0
    assert maps.floor > 0.0
    assert np.all(maps.metric > 0.0)
    assert 0.0 < maps.step
    np.testing.assert_allclose(maps.G @ maps.G_inv, np.eye(4), atol=1e-10)


def test_io_maps_reject_nonpositive_tau():
    with pytest.raises(ValueError):
        discrete_io_maps(build_discrete(wave_model(), 16), 0.0)


def test_discrete_transfer_function_converges():
    exact = transfer_at(wave_model(), 1.0).G.real
    errors = []
    for n in (50, 100, 200):
        G_h = discrete_io_maps(build_discrete(wave_model(), n), 1.0).G
        errors.append(np.linalg.norm(G_h - exact, 2))
    assert errors[-1] <= 1e-3
    assert errors[0] / errors[1] >= 3.0
    assert errors[1] / errors[2] >= 3.0
