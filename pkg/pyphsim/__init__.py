"""
pyphsim - Port-Hamiltonian Boundary Feedback Simulator

Structure-preserving simulation and stability verification for linear
port-Hamiltonian systems of order 1 or 2 on [0, 1], closed at the boundary
by monotone static feedback or by a port-form dynamic controller.

Core Features:
- Validated models with boundary port wiring and passivity audits
- Transfer functions G(lambda) with a positivity scan
- Summation-by-parts discretization with exact discrete power balance
- Midpoint and backward-Euler closed loops with monotone port inclusions
- Lyapunov multipliers, sufficient-condition checks and decay-rate fits
- Scenario catalog and a command-line front end

Example:
    >>> from pyphsim.scenarios import wave_model
    >>> from pyphsim.blocks import BlockDiagonal, PiecewiseLinear, ZeroMap
    >>> from pyphsim.core import ClosedLoop, build_discrete, estimate_decay
    >>>
    >>> wave = wave_model(left="dirichlet")
    >>> system = build_discrete(wave, 64)
    >>> damper = BlockDiagonal([ZeroMap(1), PiecewiseLinear(2.0, 0.5, 1.0)])
    >>> loop = ClosedLoop(system, damper, dt=1/256, T=5.0)
    >>> trace = loop.run(seed=7)
    >>> M_hat, omega_hat, quality = estimate_decay(trace)
"""

__version__ = "0.1.0"
__author__ = "pyphsim Contributors"
__license__ = "MIT"

# core must load before blocks: the simulator imports the controller block
from .core import (
    ClosedLoop,
    EnergyTrace,
    HamiltonianDensity,
    InitialDatum,
    PhsModel,
    PhsError,
    build_discrete,
    build_model,
    check_boundary_bound,
    check_eb_condition,
    check_order2_condition,
    contraction_resolve,
    create_model,
    discrete_io_maps,
    estimate_decay,
    make_multiplier,
    solve_port_inclusion,
    transfer_at,
)

from .blocks import (
    # Static maps
    MonotoneMap,
    ZeroMap,
    LinearMap,
    Relay,
    Saturation,
    Deadzone,
    PowerLaw,
    PiecewiseLinear,
    BlockDiagonal,
    verify_monotone,
    verify_sector,
    # Dynamic controllers
    Controller,
    create_collocated_controller,
    verify_controller,
)

__all__ = [
    # Version info
    '__version__',
    '__author__',
    '__license__',

    # Models
    'HamiltonianDensity',
    'PhsModel',
    'build_model',
    'create_model',
    'transfer_at',

    # Simulation
    'build_discrete',
    'discrete_io_maps',
    'solve_port_inclusion',
    'contraction_resolve',
    'ClosedLoop',
    'EnergyTrace',
    'InitialDatum',

    # Stability
    'make_multiplier',
    'check_order2_condition',
    'check_eb_condition',
    'check_boundary_bound',
    'estimate_decay',

    # Feedback blocks
    'MonotoneMap',
    'ZeroMap',
    'LinearMap',
    'Relay',
    'Saturation',
    'Deadzone',
    'PowerLaw',
    'PiecewiseLinear',
    'BlockDiagonal',
    'verify_monotone',
    'verify_sector',
    'Controller',
    'create_collocated_controller',
    'verify_controller',

    # Errors
    'PhsError',
]
