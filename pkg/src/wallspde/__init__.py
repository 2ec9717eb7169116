"""Reflected stochastic heat equations on [0, 1]: simulation, rate functionals,
quasipotential optimization, and invariant-measure diagnostics."""

from wallspde.lattice import (
    Grid,
    Operator,
    SpaceTimeField,
    Walls,
    backward_euler_inverse,
    build_grid,
    cosine_eigensystem,
    heat_kernel,
    holder_norm,
    neumann_operator,
)
from wallspde.obstacle import LocalTime, ObstacleSolution, check_complementarity, solve_obstacle
from wallspde.dynamics import (
    CoefficientSpec,
    Control,
    NoiseRealization,
    Trajectory,
    local_time_energy,
    sample_noise,
    solve_deterministic,
    solve_skeleton,
    solve_spde,
    step_penalized,
)
from wallspde.rate import (
    OptimizerOptions,
    QuasipotentialResult,
    RecoveredControl,
    glue_path,
    infinite_horizon_check,
    level_set_distance,
    quasipotential_J,
    rate_I,
    rate_S,
    recover_control,
    shift_concat,
    stability_bound_check,
)
from wallspde.measure import (
    EmpiricalMeasure,
    LdpDiagnostics,
    SamplingPlan,
    ball_probability,
    ldp_scaling_curve,
    sample_invariant,
    tightness_probe,
    wilson_interval,
)

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "Operator",
    "SpaceTimeField",
    "Walls",
    "backward_euler_inverse",
    "build_grid",
    "cosine_eigensystem",
    "heat_kernel",
    "holder_norm",
    "neumann_operator",
    "LocalTime",
    "ObstacleSolution",
    "check_complementarity",
    "solve_obstacle",
    "CoefficientSpec",
    "Control",
    "NoiseRealization",
    "Trajectory",
    "local_time_energy",
    "sample_noise",
    "solve_deterministic",
    "solve_skeleton",
    "solve_spde",
    "step_penalized",
    "OptimizerOptions",
    "QuasipotentialResult",
    "RecoveredControl",
    "glue_path",
    "infinite_horizon_check",
    "level_set_distance",
    "quasipotential_J",
    "rate_I",
    "rate_S",
    "recover_control",
    "shift_concat",
    "stability_bound_check",
    "EmpiricalMeasure",
    "LdpDiagnostics",
    "SamplingPlan",
    "ball_probability",
    "ldp_scaling_curve",
    "sample_invariant",
    "tightness_probe",
    "wilson_interval",
    "__version__",
]
