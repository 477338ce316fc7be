"""Minimum-time trajectory planning for car-like vehicles on terrain meshes.

The pipeline: parse a triangulated terrain into a directed edge graph, tag
admissible edge transitions from kinematic limits, assemble a mixed-integer
model whose relaxed objective is total traversal time, solve it with
branch and bound over an LP backend, and extract a node path with a velocity
profile. A brute-force oracle and batch evaluation utilities support testing
and benchmarking.
"""

from .errors import (
    ExtractionError,
    InfeasibleRequestError,
    KinoplanError,
    MeshFormatError,
    MeshParseError,
    MeshValidationError,
    ModelFormatError,
    NonManifoldWarning,
    SolverNumericalError,
    UnboundedError,
)
from .evaluation import (
    ConstraintBreakdown,
    ScenarioSpec,
    aggregate,
    constraint_error,
    path_length_excess,
    read_limit_sets_csv,
    read_scenarios_csv,
    run_batch,
    synth_mesh,
    write_aggregates_csv,
    write_results_csv,
)
from .kinematics import (
    DEFAULT_LIMITS,
    NEAR_ZERO_VELOCITY,
    KinodynamicLimits,
    TransitionTable,
    build_transition_table,
    pitch_angle,
    yaw_cosine,
)
from .mesh import (
    MeshGraph,
    content_hash,
    nearest_vertex,
    parse_mesh,
    parse_obj,
    parse_off,
    write_off,
)
from .model import MilpModel, PlanRequest, build_model
from .model_io import export_model, import_model
from .oracle import OracleResult, enumerate_paths, optimal_profile_dp, oracle_best
from .planner import MeshPlanner, PlanResult
from .solver import (
    SolveOptions,
    SolveResult,
    SolveStatus,
    solve_lp,
    solve_milp,
)
from .trajectory import (
    Trajectory,
    ValidationReport,
    acceleration_profile,
    extract_path,
    from_json,
    to_json,
    validate,
    velocity_profile,
)

__version__ = "0.1.0"

__all__ = [
    "ConstraintBreakdown",
    "DEFAULT_LIMITS",
    "ExtractionError",
    "InfeasibleRequestError",
    "KinodynamicLimits",
    "KinoplanError",
    "MeshFormatError",
    "MeshGraph",
    "MeshParseError",
    "MeshPlanner",
    "MeshValidationError",
    "MilpModel",
    "ModelFormatError",
    "NEAR_ZERO_VELOCITY",
    "NonManifoldWarning",
    "OracleResult",
    "PlanRequest",
    "PlanResult",
    "ScenarioSpec",
    "SolveOptions",
    "SolveResult",
    "SolveStatus",
    "SolverNumericalError",
    "Trajectory",
    "TransitionTable",
    "UnboundedError",
    "ValidationReport",
    "acceleration_profile",
    "aggregate",
    "build_model",
    "build_transition_table",
    "constraint_error",
    "content_hash",
    "enumerate_paths",
    "export_model",
    "extract_path",
    "from_json",
    "import_model",
    "nearest_vertex",
    "optimal_profile_dp",
    "oracle_best",
    "parse_mesh",
    "parse_obj",
    "parse_off",
    "path_length_excess",
    "pitch_angle",
    "read_limit_sets_csv",
    "read_scenarios_csv",
    "run_batch",
    "solve_lp",
    "solve_milp",
    "synth_mesh",
    "to_json",
    "validate",
    "velocity_profile",
    "write_aggregates_csv",
    "write_off",
    "write_results_csv",
    "yaw_cosine",
]
