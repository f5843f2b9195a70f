"""
Feedback blocks for pyphsim

Static monotone maps and port-form dynamic controllers closing a
port-Hamiltonian system at its boundary.
"""

from .controller import (
    Controller,
    ControllerReport,
    create_collocated_controller,
    incremental_dissipation,
    verify_controller,
)
from .monotone import (
    BlockDiagonal,
    Deadzone,
    LinearMap,
    MonotoneMap,
    MonotonicityReport,
    PiecewiseLinear,
    PowerLaw,
    Relay,
    Saturation,
    SectorReport,
    ZeroMap,
    block_diagonal,
    membership,
    minimal_section,
    monotone_from_config,
    resolve,
    verify_monotone,
    verify_sector,
)

__all__ = [
    # Static maps
    "MonotoneMap",
    "ZeroMap",
    "LinearMap",
    "Relay",
    "Saturation",
    "Deadzone",
    "PowerLaw",
    "PiecewiseLinear",
    "BlockDiagonal",
    "block_diagonal",
    "resolve",
    "minimal_section",
    "membership",
    "monotone_from_config",
    "verify_monotone",
    "verify_sector",
    "MonotonicityReport",
    "SectorReport",
    # Dynamic controllers
    "Controller",
    "ControllerReport",
    "create_collocated_controller",
    "incremental_dissipation",
    "verify_controller",
]
