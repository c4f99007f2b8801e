#!/usr/bin/env python3
"""
hdmpc Error Handling

Provides the exception hierarchy shared by the solver modules and the CLI.

Errors fall into families, each mapped to a CLI exit code:
    - ValidationError and subclasses: malformed or inconsistent input (2)
    - CertificationError: a structural assumption fails to certify (3)
    - RuntimeAssumptionError: a runtime-checked guarantee fails (4)
    - HdmpcIOError: reading or writing files (5)
    - SolverError: numerical or protocol failures (1)
"""

import functools
import sys
from typing import Any, Callable, Dict, Optional, cast

from assistant_skills_lib.error_handler import BaseAPIError
from assistant_skills_lib.error_handler import ValidationError as BaseValidationError
from assistant_skills_lib.error_handler import handle_errors as base_handle_errors
from assistant_skills_lib.error_handler import print_error as base_print_error

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_CERTIFICATION = 3
EXIT_RUNTIME_ASSUMPTION = 4
EXIT_IO = 5


class HdmpcError(BaseAPIError):
    """Base exception for all hdmpc errors."""

    pass


# -----------------------------------------------------------------------------
# Validation family
# -----------------------------------------------------------------------------


class ValidationError(BaseValidationError, HdmpcError):
    """Raised for invalid input documents, dimensions or parameters."""

    def __init__(
        self,
        message: str = "Invalid input.",
        field: Optional[str] = None,
        **kwargs: Any,
    ):
        self.field = field
        if field:
            message = f"Invalid value for '{field}': {message}"
        super().__init__(message, **kwargs)


class ParseError(ValidationError):
    """Raised when an instance document cannot be parsed."""

    def __init__(
        self,
        message: str = "Could not parse document.",
        line: Optional[int] = None,
        column: Optional[int] = None,
        **kwargs: Any,
    ):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message, **kwargs)


class DimensionMismatchError(ValidationError):
    """Raised when array shapes contradict declared dimensions."""

    def __init__(
        self,
        message: str = "Dimension mismatch.",
        expected: Optional[tuple] = None,
        actual: Optional[tuple] = None,
        **kwargs: Any,
    ):
        self.expected = expected
        self.actual = actual
        if expected is not None and actual is not None:
            message = f"{message} Expected shape {expected}, got {actual}"
        super().__init__(message, **kwargs)


class UnknownSubsystemError(ValidationError):
    """Raised when a subsystem id is referenced but not declared."""

    def __init__(
        self,
        message: str = "Unknown subsystem.",
        subsystem: Optional[int] = None,
        **kwargs: Any,
    ):
        self.subsystem = subsystem
        if subsystem is not None:
            message = f"Unknown subsystem id {subsystem}."
        super().__init__(message, **kwargs)


class HorizonTooSmallError(ValidationError):
    """Raised when the prediction horizon is shorter than one step."""

    def __init__(self, message: str = "Horizon must be at least 1.", **kwargs: Any):
        super().__init__(message, **kwargs)


class UnboundedBoxError(ValidationError):
    """Raised when an input box has an infinite bound."""

    def __init__(
        self, message: str = "Input box bounds must be finite.", **kwargs: Any
    ):
        super().__init__(message, **kwargs)


# -----------------------------------------------------------------------------
# Certification family
# -----------------------------------------------------------------------------


class CertificationError(HdmpcError):
    """Raised when a structural assumption cannot be certified."""

    pass


class NotBlockDiagonalKError(CertificationError):
    """Raised when the feedback gain couples different subsystems."""

    def __init__(
        self,
        message: str = "Feedback gain K is not block-diagonal.",
        block: Optional[tuple] = None,
        **kwargs: Any,
    ):
        self.block = block
        if block is not None:
            message = f"{message} Nonzero off-diagonal block {block}."
        super().__init__(message, **kwargs)


class WeakCouplingViolatedError(CertificationError):
    """Raised when lambda_min(H_ii) <= sum_j sigma_max(H_ij) for some block."""

    def __init__(
        self,
        message: str = "Weak coupling condition violated.",
        block: Optional[int] = None,
        lambda_min: Optional[float] = None,
        coupling: Optional[float] = None,
        **kwargs: Any,
    ):
        self.block = block
        self.lambda_min = lambda_min
        self.coupling = coupling
        if block is not None:
            message = (
                f"{message} Block {block}: lambda_min={lambda_min:.6g} "
                f"<= coupling={coupling:.6g}"
            )
        super().__init__(message, **kwargs)


class SlaterViolatedError(CertificationError):
    """Raised when a Slater vector is not strictly feasible."""

    def __init__(
        self,
        message: str = "Slater vector is not strictly feasible.",
        min_margin: Optional[float] = None,
        **kwargs: Any,
    ):
        self.min_margin = min_margin
        if min_margin is not None:
            message = f"{message} Minimum margin {min_margin:.6g}."
        super().__init__(message, **kwargs)


class VertexEnumerationTooLargeError(CertificationError):
    """Raised when polytope vertex enumeration exceeds the configured cap."""

    def __init__(
        self,
        message: str = "Vertex enumeration exceeds cap.",
        count: Optional[int] = None,
        cap: Optional[int] = None,
        **kwargs: Any,
    ):
        self.count = count
        self.cap = cap
        if count is not None:
            message = f"{message} {count} candidates, cap {cap}."
        super().__init__(message, **kwargs)


# -----------------------------------------------------------------------------
# Runtime assumption family
# -----------------------------------------------------------------------------


class RuntimeAssumptionError(HdmpcError):
    """Raised when a guarantee checked at run time does not hold."""

    pass


class AssumptionFourViolatedError(RuntimeAssumptionError):
    """Raised when f(u_prev, x_prev) - f(u_bar, x) <= delta at some step."""

    def __init__(
        self,
        message: str = "Cost-decrease assumption violated.",
        step: Optional[int] = None,
        decrease: Optional[float] = None,
        delta: Optional[float] = None,
        **kwargs: Any,
    ):
        self.step = step
        self.decrease = decrease
        self.delta = delta
        if step is not None:
            message = (
                f"{message} Step {step}: decrease {decrease:.6g} "
                f"<= delta {delta:.6g}"
            )
        super().__init__(message, **kwargs)


class FeasibilityCertificateFailedError(RuntimeAssumptionError):
    """Raised when the averaged primal iterate is not strictly feasible."""

    def __init__(
        self,
        message: str = "Averaged solution is not strictly feasible.",
        worst: Optional[float] = None,
        row: Optional[int] = None,
        **kwargs: Any,
    ):
        self.worst = worst
        self.row = row
        if worst is not None:
            message = f"{message} Worst constraint value {worst:.6g} (row {row})."
        super().__init__(message, **kwargs)


class PredictedTerminalOutsideXfError(RuntimeAssumptionError):
    """Raised when a solution's predicted terminal state is not inside Xf."""

    def __init__(
        self,
        message: str = "Predicted terminal state is not strictly inside Xf.",
        slack: Optional[float] = None,
        **kwargs: Any,
    ):
        self.slack = slack
        if slack is not None:
            message = f"{message} Minimum slack {slack:.6g}."
        super().__init__(message, **kwargs)


class ShiftedSlaterViolatedError(RuntimeAssumptionError):
    """Raised when the shifted solution is not strictly feasible at the next state."""

    def __init__(
        self,
        message: str = "Shifted Slater vector is not strictly feasible.",
        step: Optional[int] = None,
        min_margin: Optional[float] = None,
        **kwargs: Any,
    ):
        self.step = step
        self.min_margin = min_margin
        if min_margin is not None:
            message = f"{message} Step {step}: minimum margin {min_margin:.6g}."
        super().__init__(message, **kwargs)


class LyapunovViolationError(RuntimeAssumptionError):
    """Raised when the closed-loop cost fails to decrease strictly."""

    def __init__(
        self,
        message: str = "Closed-loop cost did not decrease.",
        step: Optional[int] = None,
        previous: Optional[float] = None,
        current: Optional[float] = None,
        **kwargs: Any,
    ):
        self.step = step
        self.previous = previous
        self.current = current
        if step is not None:
            message = (
                f"{message} Step {step}: f={current:.17g} >= previous {previous:.17g}"
            )
        super().__init__(message, **kwargs)


class BoundViolatedError(RuntimeAssumptionError):
    """Raised when a certified per-iteration bound fails."""

    def __init__(
        self,
        message: str = "Certified bound violated.",
        bound: Optional[str] = None,
        k: Optional[int] = None,
        lhs: Optional[float] = None,
        rhs: Optional[float] = None,
        **kwargs: Any,
    ):
        self.bound = bound
        self.k = k
        self.lhs = lhs
        self.rhs = rhs
        if bound is not None:
            message = f"{message} {bound} at k={k}: {lhs:.17g} > {rhs:.17g}"
        super().__init__(message, **kwargs)


# -----------------------------------------------------------------------------
# Solver family
# -----------------------------------------------------------------------------


class SolverError(HdmpcError):
    """Raised for numerical or protocol failures inside the solvers."""

    pass


class LocalSolveFailedError(SolverError):
    """Raised when a local box-QP solve does not terminate."""

    def __init__(
        self,
        message: str = "Local box QP solve did not terminate.",
        iterations: Optional[int] = None,
        **kwargs: Any,
    ):
        self.iterations = iterations
        if iterations is not None:
            message = f"{message} Gave up after {iterations} iterations."
        super().__init__(message, **kwargs)


class DegenerateDeltaError(SolverError):
    """Raised when the cost-decrease budget is numerically zero."""

    def __init__(
        self,
        message: str = "Cost-decrease budget is degenerate.",
        delta: Optional[float] = None,
        **kwargs: Any,
    ):
        self.delta = delta
        if delta is not None:
            message = f"{message} delta={delta:.6g}"
        super().__init__(message, **kwargs)


class ProtocolViolationError(SolverError):
    """Raised when the simulated message protocol is broken."""

    pass


class InstanceTooLargeError(SolverError):
    """Raised when an exact reference solve exceeds its enumeration cap."""

    def __init__(
        self,
        message: str = "Instance too large for exact enumeration.",
        size: Optional[int] = None,
        cap: Optional[int] = None,
        **kwargs: Any,
    ):
        self.size = size
        self.cap = cap
        if size is not None:
            message = f"{message} Size {size} exceeds cap {cap}."
        super().__init__(message, **kwargs)


class InfeasibleError(SolverError):
    """Raised when an exact reference solve finds no feasible point."""

    def __init__(self, message: str = "Problem is infeasible.", **kwargs: Any):
        super().__init__(message, **kwargs)


class HdmpcIOError(HdmpcError):
    """Raised when an instance, trace or log file cannot be read or written."""

    def __init__(
        self,
        message: str = "I/O error.",
        path: Optional[str] = None,
        **kwargs: Any,
    ):
        self.path = path
        if path:
            message = f"{message} Path: {path}"
        super().__init__(message, **kwargs)


class ConvergedToOrigin(HdmpcError):
    """Signals that the state has reached the origin; the closed loop is done."""

    def __init__(
        self,
        message: str = "State converged to the origin.",
        step: Optional[int] = None,
        **kwargs: Any,
    ):
        self.step = step
        if step is not None:
            message = f"{message} Step {step}."
        super().__init__(message, **kwargs)


def exit_code_for(error: BaseException) -> int:
    """
    Map an exception to the CLI exit code of its family.
    """
    if isinstance(error, ConvergedToOrigin):
        return EXIT_OK
    if isinstance(error, (ValidationError, BaseValidationError)):
        return EXIT_VALIDATION
    if isinstance(error, CertificationError):
        return EXIT_CERTIFICATION
    if isinstance(error, RuntimeAssumptionError):
        return EXIT_RUNTIME_ASSUMPTION
    if isinstance(error, HdmpcIOError):
        return EXIT_IO
    return EXIT_FAILURE


def print_error(message: str, include_traceback: bool = False) -> None:
    """
    Print error message to stderr with formatting.
    """
    base_print_error(message, show_traceback=include_traceback)


def handle_errors(func: Callable[..., Any]) -> Callable[..., Any]:
    """
    Decorator for handling errors in scripts built on the library.
    """

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except HdmpcError as e:
            base_print_error(f"hdmpc error: {e}", e)
            sys.exit(exit_code_for(e))

    return cast(Callable[..., Any], base_handle_errors(wrapper))


def format_error_for_json(error: HdmpcError) -> Dict[str, Any]:
    """
    Format error for JSON output.
    """
    return {
        "error": True,
        "type": type(error).__name__,
        "message": error.message,
        "operation": error.operation,
        "details": error.details,
        "exit_code": exit_code_for(error),
    }
