"""
Tests for the dynamic boundary controller

Tests:
- Controller construction, adjoint output matrix and config form
- verify_controller estimates on a collocated controller
- incremental_dissipation over all sample pairs
- Failing output bound and decay items
"""

import math

import numpy as np
import pytest

from pyphsim.blocks.controller import (
    Controller,
    create_collocated_controller,
    incremental_dissipation,
    verify_controller,
)
from pyphsim.blocks.monotone import LinearMap, Relay
from pyphsim.core.errors import DimensionError


# ==============================================================================
# Construction
# ==============================================================================

def test_linear_controller_shapes_and_adjoint():
    W = np.diag([2.0, 1.0])
    B_c = np.array([[1.0, 0.0, 0.5], [0.0, 1.0, 0.0]])
    ctrl = Controller.linear(A_c=-np.eye(2), B_c=B_c, D_c=np.eye(3), weight=W)
    assert (ctrl.n_c, ctrl.n_ports) == (2, 3)
    np.testing.assert_allclose(ctrl.C_c, B_c.T @ W)
    x_c = np.array([1.0, -1.0])
    assert ctrl.energy(x_c) == pytest.approx(1.5)
    assert ctrl.norm(x_c) == pytest.approx(math.sqrt(3.0))
    np.testing.assert_allclose(ctrl.output(x_c, np.ones(3)), B_c.T @ W @ x_c + 1.0)


def test_controller_rejects_inconsistent_data():
    with pytest.raises(DimensionError):
        Controller(LinearMap(np.eye(3)), np.eye(2), LinearMap(np.eye(2)))
    with pytest.raises(ValueError):
        Controller.linear(-np.eye(2), np.eye(2), np.eye(2), Pi=[[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        Controller.linear(-np.eye(2), np.eye(2), np.eye(2), weight=np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        Controller(LinearMap(np.eye(2)), np.eye(2), LinearMap(np.eye(2)), C_c=2.0 * np.eye(2))


def test_controller_from_config():
    ctrl = Controller.from_config(
        {"A_c": [[-1.0]], "B_c": [[1.0, 0.0]], "D_c": [[1.0, 0.0], [0.0, 1.0]]}
    )
    assert (ctrl.n_c, ctrl.n_ports) == (1, 2)
    np.testing.assert_allclose(ctrl.C_c, [[1.0], [0.0]])

    relay = Controller.from_config({
        "dissipation": {"kind": "relay", "level": 0.5},
        "B_c": [[1.0]],
        "name": "friction",
    })
    assert isinstance(relay.dissipation, Relay)
    assert relay.describe()["name"] == "friction"
    with pytest.raises(ValueError):
        Controller.from_config({"B_c": [[1.0]]})


# ==============================================================================
# verify_controller
# ==============================================================================

def test_incremental_dissipation_uses_all_pairs():
    zero, one = np.zeros(1), np.ones(1)
    points = [
        (zero, zero, zero, zero),
        (zero, zero, one, one),
        (zero, zero, -3.0 * one, -one),
    ]
    # neighbours give 1 and 1/2; the first and last samples give 3/9
    rho, ok = incremental_dissipation(points, np.eye(1), np.eye(1))
    assert ok
    assert rho == pytest.approx(1.0 / 3.0)


def test_incremental_dissipation_flags_a_flat_negative_pair():
    zero, one = np.zeros(1), np.ones(1)
    # Pi = 0 leaves |dx|^2 + |Pi du|^2 = 0 while <dd, du> < 0
    points = [(zero, zero, zero, zero), (zero, zero, one, -one)]
    _, ok = incremental_dissipation(points, np.eye(1), np.zeros((1, 1)))
    assert not ok


def test_collocated_controller_estimates():
    report = verify_controller(create_collocated_controller(2), seed=0)
    assert report.passed
    # a_c = I and d_c = I: the pairing equals the denominator
    assert report.rho == pytest.approx(1.0)
    # |x + u|^2 <= 2 (|x|^2 + |u|^2)
    assert 0.0 < report.c_prime <= 2.0 + 1e-12
    # backward Euler over [0, 1] with 200 steps: 1 - (1 + 1/200)^-400
    assert report.delta == pytest.approx(1.0 - 1.005 ** -400, rel=1e-9)
    assert report.c >= 0.0
    assert report.to_dict()["estimates"] is True


def test_feedthrough_outside_the_projection_fails_output_bound():
    ctrl = Controller.linear(-np.eye(2), np.eye(2), np.eye(2), Pi=np.diag([1.0, 0.0]))
    report = verify_controller(ctrl, seed=1)
    assert not report.output_bound_ok
    assert report.witness["item"] == "output_bound"
    assert not report.passed


def test_undamped_controller_fails_decay():
    ctrl = Controller.linear(np.zeros((2, 2)), np.eye(2), np.eye(2))
    report = verify_controller(ctrl, seed=2)
    assert not report.decay_ok
    assert report.delta == pytest.approx(0.0, abs=1e-12)
    assert not report.passed


def test_verify_controller_argument_checks():
    ctrl = create_collocated_controller(1)
    with pytest.raises(ValueError):
        verify_controller(ctrl, trials=1)
    with pytest.raises(ValueError):
        verify_controller(ctrl, horizon=0.0)
