"""
hdmpc

Hierarchical model predictive control for networks of coupled linear
subsystems, solved by dual decomposition with constraint tightening:
    - model: subsystem and network descriptions, Schur and invariance checks
    - condense: the finite-horizon problem as one QP in the stacked inputs
    - tighten: Slater certificates, norm bounds and the tightened problem
    - inner_jacobi: contraction certificate and the Jacobi inner loop
    - outer_subgrad: approximate dual subgradient loop with primal averaging
    - mpc_loop: closed-loop driver and cost-decrease monitoring
    - harness: coordinator/agent message passing over a simulated network
    - oracle: exact enumeration solvers for desk-scale checks
    - instance / trace_writer: JSON instance documents and JSONL traces
    - config_manager: layered solver settings
    - error_handler: exception hierarchy and exit codes

Example usage:
    from hdmpc import load_config, simulate

    doc = load_config("twin.json")
    trace = simulate(doc.network, doc.x0, doc.u_bar0, steps=10, delta0=doc.delta0)
    print(trace[-1].f_value)
"""

from .certification import CertificationReport, CheckResult, certify_instance
from .condense import (
    CondensedProblem,
    condense,
    eval_constraints,
    eval_cost,
    rollout,
    rollout_constraints,
    rollout_cost,
)
from .config_manager import (
    ConfigManager,
    SolverOptions,
    get_config,
    get_config_manager,
    get_solver_defaults,
    get_solver_options,
)
from .error_handler import (
    AssumptionFourViolatedError,
    BoundViolatedError,
    CertificationError,
    ConvergedToOrigin,
    DegenerateDeltaError,
    DimensionMismatchError,
    FeasibilityCertificateFailedError,
    HdmpcError,
    HdmpcIOError,
    HorizonTooSmallError,
    InfeasibleError,
    InstanceTooLargeError,
    LocalSolveFailedError,
    LyapunovViolationError,
    NotBlockDiagonalKError,
    ParseError,
    PredictedTerminalOutsideXfError,
    ProtocolViolationError,
    RuntimeAssumptionError,
    ShiftedSlaterViolatedError,
    SlaterViolatedError,
    SolverError,
    UnboundedBoxError,
    UnknownSubsystemError,
    ValidationError,
    VertexEnumerationTooLargeError,
    WeakCouplingViolatedError,
    exit_code_for,
    format_error_for_json,
    handle_errors,
    print_error,
)
from .formatters import (
    Colors,
    format_certificate_report,
    format_json,
    format_message_stats,
    format_step_solution,
    format_table,
    format_trace_summary,
    format_vector,
    print_info,
    print_success,
    print_warning,
)
from .harness import (
    COORDINATOR,
    Message,
    MessageKind,
    MessageStats,
    NetworkLog,
    SimulatedNetwork,
    message_stats,
    read_message_log,
    run_distributed_step,
    write_message_log,
)
from .inner_jacobi import (
    BlockPartition,
    ContractionCertificate,
    InnerSolve,
    JacobiState,
    certify_contraction,
    inner_iterations_needed,
    jacobi_sweep,
    lipschitz_bound,
    local_argmin,
    partition_problem,
    solve_lagrangian,
)
from .instance import ConfigDocument, dump_config, instance_hash, load_config, parse_config
from .model import (
    AggregateModel,
    CouplingGraph,
    NetworkSpec,
    Polytope,
    SubsystemSpec,
    assemble_aggregate,
    check_schur,
    check_terminal_invariance,
    coupling_graph,
    extended_neighborhood,
)
from .mpc_loop import (
    LoopContext,
    MpcState,
    StepOutcome,
    TraceRecord,
    check_cost_decrease,
    initial_state,
    mpc_step,
    simulate,
    solve_at_state,
)
from .oracle import (
    dual_function_exact,
    lagrangian_value,
    solve_box_qp_exact,
    solve_constrained_qp_exact,
)
from .outer_subgrad import (
    DualState,
    OuterParams,
    StepSolution,
    check_bounds,
    compute_delta,
    compute_step_params,
    dual_update,
    outer_iterations_needed,
    primal_average,
    solve_tightened_step,
)
from .tighten import (
    SlaterCertificate,
    TightenedProblem,
    build_tightened,
    choose_margin,
    initial_norm_bound,
    shift_slater,
    slater_certificate,
    update_norm_bound,
)
from .trace_writer import TraceContents, TraceWriter, read_trace
from .validators import (
    parse_state,
    validate_box,
    validate_matrix,
    validate_polytope_vertices,
    validate_positive_float,
    validate_spd,
    validate_vector,
)

__version__ = "0.1.0"
__all__ = [
    "__version__",
    # Model
    "AggregateModel",
    "CouplingGraph",
    "NetworkSpec",
    "Polytope",
    "SubsystemSpec",
    "assemble_aggregate",
    "check_schur",
    "check_terminal_invariance",
    "coupling_graph",
    "extended_neighborhood",
    # Condensation
    "CondensedProblem",
    "condense",
    "eval_constraints",
    "eval_cost",
    "rollout",
    "rollout_constraints",
    "rollout_cost",
    # Tightening
    "SlaterCertificate",
    "TightenedProblem",
    "build_tightened",
    "choose_margin",
    "initial_norm_bound",
    "shift_slater",
    "slater_certificate",
    "update_norm_bound",
    # Inner loop
    "BlockPartition",
    "ContractionCertificate",
    "InnerSolve",
    "JacobiState",
    "certify_contraction",
    "inner_iterations_needed",
    "jacobi_sweep",
    "lipschitz_bound",
    "local_argmin",
    "partition_problem",
    "solve_lagrangian",
    # Outer loop
    "DualState",
    "OuterParams",
    "StepSolution",
    "check_bounds",
    "compute_delta",
    "compute_step_params",
    "dual_update",
    "outer_iterations_needed",
    "primal_average",
    "solve_tightened_step",
    # Closed loop
    "LoopContext",
    "MpcState",
    "StepOutcome",
    "TraceRecord",
    "check_cost_decrease",
    "initial_state",
    "mpc_step",
    "simulate",
    "solve_at_state",
    # Harness
    "COORDINATOR",
    "Message",
    "MessageKind",
    "MessageStats",
    "NetworkLog",
    "SimulatedNetwork",
    "message_stats",
    "read_message_log",
    "run_distributed_step",
    "write_message_log",
    # Oracle
    "dual_function_exact",
    "lagrangian_value",
    "solve_box_qp_exact",
    "solve_constrained_qp_exact",
    # Instances and traces
    "CertificationReport",
    "CheckResult",
    "ConfigDocument",
    "TraceContents",
    "TraceWriter",
    "certify_instance",
    "dump_config",
    "instance_hash",
    "load_config",
    "parse_config",
    "read_trace",
    # Config
    "ConfigManager",
    "SolverOptions",
    "get_config",
    "get_config_manager",
    "get_solver_defaults",
    "get_solver_options",
    # Errors
    "AssumptionFourViolatedError",
    "BoundViolatedError",
    "CertificationError",
    "ConvergedToOrigin",
    "DegenerateDeltaError",
    "DimensionMismatchError",
    "FeasibilityCertificateFailedError",
    "HdmpcError",
    "HdmpcIOError",
    "HorizonTooSmallError",
    "InfeasibleError",
    "InstanceTooLargeError",
    "LocalSolveFailedError",
    "LyapunovViolationError",
    "NotBlockDiagonalKError",
    "ParseError",
    "PredictedTerminalOutsideXfError",
    "ProtocolViolationError",
    "RuntimeAssumptionError",
    "ShiftedSlaterViolatedError",
    "SlaterViolatedError",
    "SolverError",
    "UnboundedBoxError",
    "UnknownSubsystemError",
    "ValidationError",
    "VertexEnumerationTooLargeError",
    "WeakCouplingViolatedError",
    "exit_code_for",
    "format_error_for_json",
    "handle_errors",
    "print_error",
    # Formatters
    "Colors",
    "format_certificate_report",
    "format_json",
    "format_message_stats",
    "format_step_solution",
    "format_table",
    "format_trace_summary",
    "format_vector",
    "print_info",
    "print_success",
    "print_warning",
    # Validators
    "parse_state",
    "validate_box",
    "validate_matrix",
    "validate_polytope_vertices",
    "validate_positive_float",
    "validate_spd",
    "validate_vector",
]
