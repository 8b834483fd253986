"""Potential flow past a doubly-periodic array of obstacles.

Mesh-free solver built on periodic fundamental solutions (Weierstrass sigma
logarithmic sources), with a convergence harness, field/streamline
extraction, and text artifact formats.
"""

from .elliptic import (
    EllipticContext,
    Lattice,
    log_abs_sigma,
    make_context,
    make_lattice,
    quasi_period_constants,
    sigma,
    theta1,
    theta1_derivatives_at_zero,
    theta1_prime,
    weier_zeta,
)
from .errors import (
    DegenerateLattice,
    ElliptFlowError,
    FormatError,
    InsideObstacle,
    InsufficientData,
    InvalidSpec,
    IoFailure,
    Overflow,
    SingularPoint,
    SolveFailure,
    StagnationStall,
)
from .fieldio import (
    FieldSample,
    Streamline,
    fold_to_cell,
    inside_any_obstacle,
    read_solution,
    sample_grid,
    trace_streamlines,
    write_convergence_csv,
    write_field_csv,
    write_solution,
    write_streamline_csv,
)
from .harness import ConvergenceRecord, DecayFit, dilute_limit_check, fit_decay_rate, sweep_N
from .mfs import (
    ChargeLayout,
    Circle,
    MfsSolution,
    ParametricObstacle,
    ProblemSpec,
    analytic_isolated_cylinder,
    assemble_system,
    boundary_residual,
    build_layout,
    circle_layout,
    complex_velocity,
    solve,
    solve_system,
    stream_function,
    velocity,
)

__version__ = "0.1.0"

__all__ = [
    "ChargeLayout",
    "Circle",
    "ConvergenceRecord",
    "DecayFit",
    "DegenerateLattice",
    "ElliptFlowError",
    "EllipticContext",
    "FieldSample",
    "FormatError",
    "InsideObstacle",
    "InsufficientData",
    "InvalidSpec",
    "IoFailure",
    "Lattice",
    "MfsSolution",
    "Overflow",
    "ParametricObstacle",
    "ProblemSpec",
    "SingularPoint",
    "SolveFailure",
    "StagnationStall",
    "Streamline",
    "analytic_isolated_cylinder",
    "assemble_system",
    "boundary_residual",
    "build_layout",
    "circle_layout",
    "complex_velocity",
    "dilute_limit_check",
    "fit_decay_rate",
    "fold_to_cell",
    "inside_any_obstacle",
    "log_abs_sigma",
    "make_context",
    "make_lattice",
    "quasi_period_constants",
    "read_solution",
    "sample_grid",
    "sigma",
    "solve",
    "solve_system",
    "stream_function",
    "sweep_N",
    "theta1",
    "theta1_derivatives_at_zero",
    "theta1_prime",
    "trace_streamlines",
    "velocity",
    "weier_zeta",
    "write_convergence_csv",
    "write_field_csv",
    "write_solution",
    "write_streamline_csv",
]
