"""
Tests for models and boundary ports

Tests:
- build_model accepts the wave and beam structures, rejects bad data
- HamiltonianDensity kinds, derivatives and config form
- port_transform, extract_ports, wiring_from_traces
- sample_passivity on lossless and sign-flipped wirings
"""

import math

import numpy as np
import pytest

from pyphsim.core.errors import (
    CoercivityError,
    DimensionError,
    DissipativityError,
    ModelError,
    SingularBoundaryError,
    SingularLeadingMatrixError,
    SymmetryError,
)
from pyphsim.core.model import HamiltonianDensity, build_model, create_model, sample_passivity
from pyphsim.core.port import (
    extract_ports,
    port_matrices,
    port_transform,
    swap_matrix,
    wiring_from_traces,
)
from pyphsim.core.rng import make_rng
from pyphsim.scenarios.models import beam_model, order2_model, transport_model, wave_model

P1_WAVE = np.array([[0.0, 1.0], [1.0, 0.0]])
W_WAVE = np.array([[1.0, 0.0, 0.0, -1.0], [1.0, 0.0, 0.0, 1.0]]) / math.sqrt(2.0)


def wave_description(**changes):
    description = {"P": [np.zeros((2, 2)), P1_WAVE], "H": np.eye(2), "W_B": W_WAVE, "W_C": W_WAVE}
    description.update(changes)
    return description


# ==============================================================================
# build_model
# ==============================================================================

def test_wave_and_beam_are_valid():
    wave = build_model(wave_description(H=np.diag([1.0, 2.0])))
    assert (wave.N, wave.d, wave.n_ports) == (1, 2, 2)
    beam = beam_model(rho=2.0, EI=3.0)
    assert (beam.N, beam.d, beam.n_ports) == (2, 2, 4)
    np.testing.assert_allclose(beam.H.at(0.3), np.diag([0.5, 3.0]))


def test_rejects_non_symmetric_first_order_coefficient():
    with pytest.raises(SymmetryError):
        build_model(wave_description(P=[np.zeros((2, 2)), [[0.0, 1.0], [-1.0, 0.0]]]))


def test_rejects_positive_lower_order_term():
    with pytest.raises(DissipativityError):
        build_model(wave_description(P=[np.eye(2), P1_WAVE]))


def test_rejects_indefinite_density():
    with pytest.raises(CoercivityError):
        build_model(wave_description(H=np.diag([1.0, -1.0])))


def test_rejects_singular_leading_matrix():
    with pytest.raises(SingularLeadingMatrixError):
        build_model(wave_description(P=[np.zeros((2, 2)), np.diag([1.0, 0.0])]))


def test_rejects_singular_port_stack():
    with pytest.raises(SingularBoundaryError):
        build_model(wave_description(W_C=W_WAVE @ swap_matrix(2)))


def test_diagnostics_list_every_problem():
    with pytest.raises(ModelError) as info:
        build_model(wave_description(P=[np.eye(2), [[0.0, 1.0], [-1.0, 0.0]]]))
    assert len(info.value.diagnostics) >= 2


def test_shape_and_order_errors():
    with pytest.raises(DimensionError):
        build_model({"P": [np.zeros((2, 2)), P1_WAVE], "H": np.eye(2), "W_B": W_WAVE})
    with pytest.raises(DimensionError):
        build_model(wave_description(W_B=np.eye(2)))
    with pytest.raises(ModelError):
        build_model(wave_description(P=[np.zeros((2, 2))] * 4))


def test_transport_scalar_model():
    model = transport_model()
    assert (model.N, model.d) == (1, 1)


# ==============================================================================
# HamiltonianDensity
# ==============================================================================

def test_density_kinds():
    table = HamiltonianDensity.table([0.0, 1.0], [np.eye(2), 3.0 * np.eye(2)])
    np.testing.assert_allclose(table.at(0.5), 2.0 * np.eye(2))
    np.testing.assert_allclose(table.derivative(0.25), 2.0 * np.eye(2))
    assert not table.is_constant
    assert table.lipschitz_constant() == pytest.approx(2.0)

    expo = HamiltonianDensity.exponential([1.0, 2.0], [0.0, 1.0])
    assert expo.at(1.0)[1, 1] == pytest.approx(2.0 * math.e)
    assert expo.derivative(0.0)[1, 1] == pytest.approx(2.0)

    affine = HamiltonianDensity.affine([1.0], [3.0])
    assert affine.at(0.5)[0, 0] == pytest.approx(2.0)
    assert affine.min_eigenvalue() == pytest.approx(1.0)


def test_density_from_config():
    H = HamiltonianDensity.from_config(
        {"kind": "profile", "name": "diagonal-exponential", "scale": [1.0], "rate": [0.5]}
    )
    assert H.at(0.0)[0, 0] == pytest.approx(1.0)
    assert HamiltonianDensity.from_config([[2.0]]).is_constant
    with pytest.raises(ValueError):
        HamiltonianDensity.from_config({"kind": "spline"})
    with pytest.raises(ValueError):
        HamiltonianDensity.table([0.0, 0.5], [np.eye(1), np.eye(1)])


def test_with_hamiltonian_keeps_structure():
    wave = wave_model()
    heavy = wave.with_hamiltonian(HamiltonianDensity.constant(5.0 * np.eye(2)))
    assert heavy.W_B is wave.W_B
    np.testing.assert_allclose(heavy.H.at(0.0), 5.0 * np.eye(2))
    with pytest.raises(DimensionError):
        wave.with_hamiltonian(HamiltonianDensity.constant(np.eye(3)))


# ==============================================================================
# Ports
# ==============================================================================

def test_port_transform_first_and_second_order():
    Q, R_ext = port_transform(wave_model())
    np.testing.assert_array_equal(Q, P1_WAVE)
    np.testing.assert_allclose(R_ext @ R_ext.T, np.eye(4), atol=1e-15)

    P2 = np.array([[0.0, -1.0], [1.0, 0.0]])
    Q2, _ = port_transform(beam_model())
    expected = np.block([[np.zeros((2, 2)), P2], [-P2, np.zeros((2, 2))]])
    np.testing.assert_array_equal(Q2, expected)


def test_extract_ports_boundary_flow_and_effort():
    ports = extract_ports(wave_model(), np.array([1.0, 0.0, 0.0, 0.0]))
    np.testing.assert_allclose(ports.f_boundary, [0.0, 1.0 / math.sqrt(2.0)], atol=1e-15)
    np.testing.assert_allclose(ports.e_boundary, [1.0 / math.sqrt(2.0), 0.0], atol=1e-15)


def test_extract_ports_neumann_wiring():
    a1, a2, b1, b2 = 0.3, -1.2, 0.7, 2.5
    ports = extract_ports(wave_model(), np.array([a1, a2, b1, b2]))
    np.testing.assert_allclose(ports.u, [-b2, a2], atol=1e-14)
    np.testing.assert_allclose(ports.y, [b1, a1], atol=1e-14)


def test_extract_ports_zero_and_linearity():
    model = beam_model()
    zero = extract_ports(model, np.zeros(8))
    assert not np.any(zero.u) and not np.any(zero.y)
    rng = make_rng(5)
    t1, t2 = rng.standard_normal(8), rng.standard_normal(8)
    combined = extract_ports(model, 2.5 * t1 + t2)
    np.testing.assert_allclose(
        combined.u, 2.5 * extract_ports(model, t1).u + extract_ports(model, t2).u, atol=1e-13
    )
    with pytest.raises(DimensionError):
        extract_ports(model, np.zeros(4))


def test_wiring_from_traces_roundtrip_on_the_trace_stack():
    inputs = np.array([[0.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
    outputs = np.array([[0.0, 0.0, 0.0, -1.0], [1.0, 0.0, 0.0, 0.0]])
    W_B, W_C = wiring_from_traces([np.zeros((2, 2)), P1_WAVE], inputs, outputs)
    model = create_model([np.zeros((2, 2)), P1_WAVE], np.eye(2), W_B, W_C)
    W_u, W_y = port_matrices(model)
    np.testing.assert_allclose(W_u, inputs, atol=1e-14)
    np.testing.assert_allclose(W_y, outputs, atol=1e-14)


def test_beam_ports_are_lossless():
    model = beam_model()
    W_u, W_y = port_matrices(model)
    form = W_u.T @ W_y
    Q, _ = port_transform(model)
    # <u, y> = (<t(1), Q t(1)> - <t(0), Q t(0)>) / 2 on the trace stack
    target = np.block([[Q, np.zeros((4, 4))], [np.zeros((4, 4)), -Q]])
    np.testing.assert_allclose(0.5 * (form + form.T), 0.5 * target, atol=1e-14)


# ==============================================================================
# Passivity
# ==============================================================================

@pytest.mark.parametrize("factory", [wave_model, beam_model, lambda: wave_model(left="dirichlet")])
def test_lossless_wirings_pass(factory):
    report = sample_passivity(factory(), seed=1)
    assert report.passed
    assert abs(report.worst_margin) <= 1e-8 * report.scale


def test_damped_order2_passes_with_margin():
    report = sample_passivity(order2_model(damping=0.5), seed=2)
    assert report.passed
    assert report.worst_margin >= -1e-8 * report.scale


def test_sign_flipped_output_fails():
    wave = wave_model()
    W_C = wave.W_C.copy()
    W_C[0] *= -1.0
    flipped = create_model(wave.P, wave.H, wave.W_B, W_C)
    report = sample_passivity(flipped, seed=4)
    assert not report.passed
    assert report.worst_margin < 0.0
    assert report.to_dict()["trials"] == 64
