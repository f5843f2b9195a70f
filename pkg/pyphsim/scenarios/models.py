"""
Model builders for the shipped scenarios.

Ports are declared directly on the trace stack t = (z(1), z'(1), z(0), z'(0))
of z = Hx and converted to W_B, W_C with wiring_from_traces. Every
wiring below is lossless: <u, y> equals the boundary power.
"""

from typing import Optional

import numpy as np

from ..core.model import HamiltonianDensity, PhsModel, create_model
from ..core.port import wiring_from_traces

WAVE_LEFT = ("neumann", "dirichlet")

# second-order skew leading term shared by the beam and the order-2 family
_P2_SKEW = np.array([[0.0, -1.0], [1.0, 0.0]])


def _rows(size: int, entries) -> np.ndarray:
    L = np.zeros((len(entries), size))
    for r, (col, sign) in enumerate(entries):
        L[r, col] = sign
    return L


def wave_model(
    rho: float = 1.0,
    EI: float = 1.0,
    left: str = "neumann",
    rho_rate: float = 0.0,
    EI_rate: float = 0.0,
    name: Optional[str] = None
) -> PhsModel:
    """
    Wave equation rho w_tt = (EI w_z)_z as a first-order system.

    x = (rho w_t, w_z), H = diag(1/rho(zeta), EI(zeta)), P_1 = [[0, 1], [1, 0]],
    with rho(zeta) = rho exp(rho_rate zeta) and EI(zeta) = EI exp(EI_rate zeta).

    Ports, z = Hx = (velocity, stress):
        neumann left:   u = (-z_2(0), z_2(1)), y = (z_1(0), z_1(1))
        dirichlet left: u = (z_1(0), z_2(1)),  y = (-z_2(0), z_1(1))

    Example:
        >>> wave = wave_model()
        >>> wave.W_B * np.sqrt(2.0)
        array([[ 1.,  0.,  0., -1.],
               [ 1.,  0.,  0.,  1.]])
    """
    if left not in WAVE_LEFT:
        raise ValueError(f"left must be one of {WAVE_LEFT}, got '{left}'")
    if rho <= 0.0 or EI <= 0.0:
        raise ValueError(f"rho and EI must be positive, got rho={rho}, EI={EI}")
    P0 = np.zeros((2, 2))
    P1 = np.array([[0.0, 1.0], [1.0, 0.0]])
    if rho_rate == 0.0 and EI_rate == 0.0:
        H = HamiltonianDensity.constant(np.diag([1.0 / rho, EI]))
    else:
        H = HamiltonianDensity.exponential([1.0 / rho, EI], [-rho_rate, EI_rate])
    # t = (z1(1), z2(1), z1(0), z2(0))
    if left == "neumann":
        inputs = _rows(4, [(3, -1.0), (1, 1.0)])
        outputs = _rows(4, [(2, 1.0), (0, 1.0)])
    else:
        inputs = _rows(4, [(2, 1.0), (1, 1.0)])
        outputs = _rows(4, [(3, -1.0), (0, 1.0)])
    W_B, W_C = wiring_from_traces([P0, P1], inputs, outputs)
    return create_model([P0, P1], H, W_B, W_C, name=name or f"wave-{left}")


def _beam_wiring(P):
    # t = (z1(1), z2(1), z1'(1), z2'(1), z1(0), z2(0), z1'(0), z2'(0))
    # u = (z1(0), z1'(0), z2(1), -z2'(1)), y = (z2'(0), -z2(0), z1'(1), z1(1))
    inputs = _rows(8, [(4, 1.0), (6, 1.0), (1, 1.0), (3, -1.0)])
    outputs = _rows(8, [(7, 1.0), (5, -1.0), (2, 1.0), (0, 1.0)])
    return wiring_from_traces(P, inputs, outputs)


def beam_model(
    rho: float = 1.0,
    EI: float = 1.0,
    rho_rate: float = 0.0,
    EI_rate: float = 0.0,
    name: str = "euler-bernoulli"
) -> PhsModel:
    """
    Euler-Bernoulli beam rho w_tt + (EI w_zz)_zz = 0.

    x = (rho w_t, w_zz), H = diag(1/rho, EI), P_2 = [[0, -1], [1, 0]],
    P_1 = P_0 = 0. With z = Hx = (velocity, bending moment), the ports are
    u = (z_1(0), z_1'(0), z_2(1), -z_2'(1)) and
    y = (z_2'(0), -z_2(0), z_1'(1), z_1(1)).
    """
    if rho <= 0.0 or EI <= 0.0:
        raise ValueError(f"rho and EI must be positive, got rho={rho}, EI={EI}")
    zero = np.zeros((2, 2))
    P = [zero, zero, _P2_SKEW]
    if rho_rate == 0.0 and EI_rate == 0.0:
        H = HamiltonianDensity.constant(np.diag([1.0 / rho, EI]))
    else:
        H = HamiltonianDensity.exponential([1.0 / rho, EI], [-rho_rate, EI_rate])
    W_B, W_C = _beam_wiring(P)
    return create_model(P, H, W_B, W_C, name=name)


def order2_model(rate: float = 0.0, damping: float = 0.1, name: str = "order2") -> PhsModel:
    """
    Second-order system with P_2 = [[0, -1], [1, 0]], P_1 = 0,
    P_0 = -damping I and H = exp(rate zeta) I, wired like the beam.
    """
    if damping < 0.0:
        raise ValueError(f"damping must be >= 0, got {damping}")
    P = [-damping * np.eye(2), np.zeros((2, 2)), _P2_SKEW]
    H = HamiltonianDensity.exponential([1.0, 1.0], [rate, rate])
    W_B, W_C = _beam_wiring(P)
    return create_model(P, H, W_B, W_C, name=name)


def transport_model(name: str = "transport") -> PhsModel:
    """
    Scalar transport dx/dt = dx/dzeta with u = f and y = e.

    G(lambda) = coth(lambda/2).
    """
    P = [np.zeros((1, 1)), np.ones((1, 1))]
    return create_model(P, np.eye(1), np.array([[1.0, 0.0]]), np.array([[1.0, 0.0]]), name=name)
