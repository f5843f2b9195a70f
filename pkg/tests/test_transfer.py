"""
Tests for continuous transfer functions

Tests:
- Companion matrix layout
- G(lambda) of the unit wave and the transport equation in closed form
- Positivity of Re G on right half plane grids
- Domain errors
"""

import cmath
import math

import numpy as np
import pytest

from pyphsim.core.errors import UnsupportedFeatureError
from pyphsim.core.rng import make_rng
from pyphsim.core.transfer import (
    assemble_companion,
    propagator,
    scan_positivity,
    trace_basis,
    transfer_at,
)
from pyphsim.scenarios.models import beam_model, transport_model, wave_model


def wave_closed_form(lam: complex) -> np.ndarray:
    coth = cmath.cosh(lam) / cmath.sinh(lam)
    csch = 1.0 / cmath.sinh(lam)
    return np.array([[coth, csch], [csch, coth]])


def right_half_plane(count: int, seed: int):
    rng = make_rng(seed)
    re = 10.0 ** rng.uniform(-1.0, 1.3, size=count)
    im = rng.uniform(-8.0, 8.0, size=count)
    return [complex(a, b) for a, b in zip(re, im)]


# ==============================================================================
# Companion matrix
# ==============================================================================

def test_companion_of_unit_wave():
    lam = 1.5 + 0.5j
    np.testing.assert_allclose(
        assemble_companion(wave_model(), lam), lam * np.array([[0.0, 1.0], [1.0, 0.0]])
    )


def test_companion_of_second_order():
    lam = 2.0
    P2_inv = np.linalg.inv(np.array([[0.0, -1.0], [1.0, 0.0]]))
    expected = np.block([[np.zeros((2, 2)), np.eye(2)], [lam * P2_inv, np.zeros((2, 2))]])
    np.testing.assert_allclose(assemble_companion(beam_model(), lam), expected)


def test_propagator_matches_hyperbolic_rotation():
    E = propagator(wave_model(), 1.0)
    np.testing.assert_allclose(E, [[math.cosh(1), math.sinh(1)], [math.sinh(1), math.cosh(1)]],
                               rtol=1e-13)


def test_trace_basis_spans_solutions():
    model = wave_model()
    lam = 0.7 + 2.0j
    K = trace_basis(model, lam)
    E = propagator(model, lam)
    # (z(1), z(0)) of every solution satisfies z(1) = E z(0)
    np.testing.assert_allclose(K[:2], E @ K[2:], atol=1e-12)


@pytest.mark.parametrize("lam", [0.0, -1.0, 1j])
def test_rejects_closed_left_half_plane(lam):
    with pytest.raises(ValueError):
        assemble_companion(wave_model(), lam)
    with pytest.raises(ValueError):
        transfer_at(wave_model(), lam)


def test_variable_density_is_unsupported():
    with pytest.raises(UnsupportedFeatureError):
        transfer_at(wave_model(EI_rate=0.5), 1.0)


# ==============================================================================
# transfer_at
# ==============================================================================

def test_unit_wave_at_one():
    ev = transfer_at(wave_model(), 1.0)
    assert ev.G[0, 0].real == pytest.approx(1.31303, abs=1e-5)
    assert ev.G[0, 1].real == pytest.approx(0.85092, abs=1e-5)
    assert ev.min_sym_eig == pytest.approx(1.0 / math.tanh(1.0) - 1.0 / math.sinh(1.0), abs=1e-10)
    row = ev.to_row()
    assert list(row)[:2] == ["lambda_re", "lambda_im"]
    assert row["G_1_1_re"] == pytest.approx(1.313035, abs=1e-6)
    assert list(row)[-2:] == ["min_sym_eig", "boundary_condition"]


@pytest.mark.parametrize("lam", [1.0, 2.0, 0.5 + 3.0j, 10.0])
def test_unit_wave_closed_form(lam):
    np.testing.assert_allclose(transfer_at(wave_model(), lam).G, wave_closed_form(lam), atol=1e-10)


def test_large_lambda_approaches_identity():
    np.testing.assert_allclose(transfer_at(wave_model(), 50.0).G, np.eye(2), atol=1e-10)


def test_unit_wave_symmetry_over_grid():
    for lam in right_half_plane(20, seed=7):
        G = transfer_at(wave_model(), lam).G
        assert abs(G[0, 1] - G[1, 0]) <= 1e-10 * max(1.0, abs(G[0, 1]))
        assert abs(G[0, 0] - G[1, 1]) <= 1e-10 * max(1.0, abs(G[0, 0]))


@pytest.mark.parametrize("lam", [0.3, 1.0, 2.0 + 1.0j])
def test_transport_closed_form(lam):
    G = transfer_at(transport_model(), lam).G
    assert G[0, 0] == pytest.approx(cmath.cosh(lam / 2) / cmath.sinh(lam / 2), abs=1e-10)


# ==============================================================================
# Positivity
# ==============================================================================

def test_scan_positivity_wave_grid():
    scan = scan_positivity(wave_model(), [1.0, 2.0 + 1.0j, 10.0, 0.1 + 5.0j])
    assert scan.passed
    assert scan.min_value > 0.0
    assert scan.to_dict()["points"] == 4


def test_scan_positivity_empty_grid():
    scan = scan_positivity(wave_model(), [])
    assert scan.passed
    assert scan.min_value is None
    assert scan.evaluations == []


@pytest.mark.parametrize("factory", [wave_model, beam_model])
def test_positive_real_on_fifty_points(factory):
    scan = scan_positivity(factory(), right_half_plane(50, seed=11))
    assert scan.passed, scan.flagged
