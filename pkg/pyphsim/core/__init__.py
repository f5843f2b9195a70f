"""
Core modules for pyphsim

Models, discretization, transfer functions, simulation and stability
diagnostics for linear port-Hamiltonian systems on [0, 1].
"""

from .constants import SolverDefaults
from .densekit import (
    condition_number,
    lu_checked,
    mat_exp,
    matrix_root,
    solve_dense,
    spectral_norm,
    sym_part_bounds,
)
from .discrete import (
    DiscreteIoMaps,
    DiscreteSystem,
    build_discrete,
    discrete_io_maps,
    discrete_power_balance,
    sbp_dissipation,
    sbp_first_derivative,
)
from .errors import (
    CoercivityError,
    ConfigError,
    DimensionError,
    DissipativityError,
    FactorizationError,
    GridError,
    ModelError,
    NonConvergenceError,
    NotPassiveError,
    OverrideError,
    PhsError,
    ProfileMismatchError,
    RangeError,
    ScenarioError,
    SingularBoundaryError,
    SingularLeadingMatrixError,
    SingularMatrixError,
    SymmetryError,
    UndefinedFitError,
    UnsupportedFeatureError,
)
from .initial import InitialDatum
from .model import (
    HamiltonianDensity,
    PassivityReport,
    PhsModel,
    build_model,
    create_model,
    power_balance_terms,
    sample_passivity,
)
from .port import PortVector, extract_ports, port_matrices, port_transform, wiring_from_traces
from .result import EnergyTrace
from .rng import make_rng
from .simulator import (
    ClosedLoop,
    ContractionSolution,
    PortSolution,
    contraction_resolve,
    solve_port_inclusion,
)
from .stability import (
    ConditionReport,
    DecayFit,
    FeedbackPorts,
    LyapunovFunctional,
    LyapunovSeries,
    Multiplier,
    check_boundary_bound,
    check_eb_condition,
    check_order2_condition,
    descent_time,
    estimate_decay,
    lyapunov_functional,
    lyapunov_q,
    lyapunov_series,
    make_eb_multiplier,
    make_multiplier,
    multiplier_for_model,
)
from .transfer import (
    PositivityScan,
    TransferEvaluation,
    assemble_companion,
    propagator,
    scan_positivity,
    trace_basis,
    transfer_at,
)

__all__ = [
    "SolverDefaults",
    # dense kernels
    "condition_number", "lu_checked", "mat_exp", "matrix_root", "solve_dense",
    "spectral_norm", "sym_part_bounds",
    # model and ports
    "HamiltonianDensity", "PhsModel", "PassivityReport", "build_model", "create_model",
    "power_balance_terms", "sample_passivity",
    "PortVector", "extract_ports", "port_matrices", "port_transform", "wiring_from_traces",
    # transfer
    "TransferEvaluation", "PositivityScan", "assemble_companion", "propagator",
    "trace_basis", "transfer_at", "scan_positivity",
    # discretization and simulation
    "DiscreteSystem", "DiscreteIoMaps", "build_discrete", "discrete_io_maps",
    "discrete_power_balance", "sbp_dissipation", "sbp_first_derivative",
    "InitialDatum", "EnergyTrace", "ClosedLoop", "PortSolution", "ContractionSolution",
    "solve_port_inclusion", "contraction_resolve", "make_rng",
    # stability
    "ConditionReport", "DecayFit", "FeedbackPorts", "LyapunovFunctional", "LyapunovSeries",
    "Multiplier", "check_boundary_bound", "check_eb_condition", "check_order2_condition",
    "descent_time", "estimate_decay", "lyapunov_functional", "lyapunov_q", "lyapunov_series",
    "make_eb_multiplier", "make_multiplier", "multiplier_for_model",
    # errors
    "PhsError", "DimensionError", "SingularMatrixError", "RangeError", "ModelError",
    "SymmetryError", "DissipativityError", "CoercivityError", "SingularLeadingMatrixError",
    "SingularBoundaryError", "UnsupportedFeatureError", "NotPassiveError", "GridError",
    "FactorizationError", "NonConvergenceError", "ProfileMismatchError", "UndefinedFitError",
    "ScenarioError", "OverrideError", "ConfigError",
]
