"""Numerical defaults shared across pyphsim."""


class SolverDefaults:
    """Tolerances, caps and grid sizes used when callers pass nothing."""

    # inner inclusion solver
    TOL = 1e-12
    MAX_ITER = 10_000
    SLOW_FRACTION = 0.25

    # audits of H(zeta), multipliers and profiles
    AUDIT_POINTS = 1024

    # relative pivot threshold for dense LU
    PIVOT_TOL = 1e-13

    # structural checks on model data
    STRUCTURE_TOL = 1e-12
    CONDITION_LIMIT = 1e12

    # SBP identity check at grid construction
    SBP_TOL = 1e-13

    # decay fit
    MIN_FIT_SAMPLES = 32
    FIT_WINDOW = 0.5

    # sector verification sample range
    SECTOR_V_MIN = 1e-6
    SECTOR_V_MAX = 1e3
