"""CLI utility functions for hdmpc."""

from __future__ import annotations

import functools
import logging
import sys
from concurrent.futures import Executor, ThreadPoolExecutor
from contextlib import contextmanager
from typing import Any, Callable, Iterator, Optional, TypeVar

import click
import numpy as np

from hdmpc import (
    CertificationError,
    ConvergedToOrigin,
    HdmpcError,
    HdmpcIOError,
    RuntimeAssumptionError,
    SolverError,
    SolverOptions,
    ValidationError,
    exit_code_for,
    get_config,
    parse_state,
    print_error,
    print_info,
)
from hdmpc.error_handler import EXIT_FAILURE

F = TypeVar("F", bound=Callable[..., Any])

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    """Configure the root logger once per invocation.

    --quiet wins over --verbose; otherwise HDMPC_LOG_LEVEL (or the settings
    file) decides, WARNING by default.
    """
    if quiet:
        level = logging.ERROR
    elif verbose:
        level = logging.INFO
    else:
        try:
            name = str(get_config().get("log_level", "WARNING")).upper()
        except Exception:
            name = "WARNING"
        level = getattr(logging, name, logging.WARNING)
        if not isinstance(level, int):
            level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger().setLevel(level)


def get_output_format(ctx: click.Context) -> str:
    """Output format chosen on the command group."""
    obj = ctx.find_root().obj or {}
    return str(obj.get("output", "text"))


def handle_cli_errors(func: F) -> F:
    """Decorator to handle exceptions in CLI commands.

    Catches HdmpcError exceptions and prints user-friendly error messages,
    then exits with the exit code of the error family.
    """

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except ConvergedToOrigin as e:
            print_info(str(e))
            sys.exit(exit_code_for(e))
        except ValidationError as e:
            print_error(f"Validation error: {e}")
            sys.exit(exit_code_for(e))
        except CertificationError as e:
            print_error(f"Certification failed: {e}")
            sys.exit(exit_code_for(e))
        except RuntimeAssumptionError as e:
            print_error(f"Runtime check failed: {e}")
            sys.exit(exit_code_for(e))
        except HdmpcIOError as e:
            print_error(f"I/O error: {e}")
            sys.exit(exit_code_for(e))
        except SolverError as e:
            print_error(f"Solver error: {e}")
            sys.exit(exit_code_for(e))
        except HdmpcError as e:
            print_error(f"hdmpc error: {e}")
            sys.exit(exit_code_for(e))
        except KeyboardInterrupt:
            print_error("Interrupted by user")
            sys.exit(130)
        except Exception as e:
            print_error(f"Unexpected error: {e}")
            sys.exit(EXIT_FAILURE)

    return wrapper  # type: ignore[return-value]


def flag_override(value: bool) -> Optional[bool]:
    """A set flag overrides lower-priority settings; an unset one defers to them."""
    return True if value else None


def state_or_default(text: Optional[str], default: np.ndarray) -> np.ndarray:
    """Parse a --state override such as "1,-0.5", or return the default."""
    if text is None:
        return default
    return parse_state(text, default.size)


@contextmanager
def sweep_executor(options: SolverOptions) -> Iterator[Optional[Executor]]:
    """Thread pool for concurrent sweeps, or None in single-threaded mode."""
    if options.single_thread:
        yield None
        return
    with ThreadPoolExecutor(max_workers=options.max_workers) as executor:
        yield executor


def with_solver_flags(func: F) -> F:
    """Decorator adding the solver flags shared by solve and simulate.

    Adds --distributed, --single-thread/--threads and --early-exit. The
    thread flag is None when unset so config and environment still apply.
    """
    func = click.option(
        "--early-exit",
        is_flag=True,
        help="Stop the outer loop once the averaged input is feasible.",
    )(func)
    func = click.option(
        "--single-thread/--threads",
        "single_thread",
        default=None,
        help="Run Jacobi sweeps sequentially or on a thread pool.",
    )(func)
    func = click.option(
        "--distributed",
        is_flag=True,
        help="Run steps through the coordinator/agent harness.",
    )(func)
    return func


def output_results(
    data: Any,
    output_format: str = "text",
    text: Optional[str] = None,
    success_msg: Optional[str] = None,
) -> None:
    """Output results in the specified format.

    Args:
        data: JSON-serializable results
        output_format: One of "json", "text"
        text: Pre-formatted text for text output; defaults to JSON of data
        success_msg: Optional success message for text output
    """
    from hdmpc import format_json, print_success

    if output_format == "json":
        click.echo(format_json(data))
        return
    if text is not None:
        click.echo(text)
    elif data:
        click.echo(format_json(data))
    if success_msg:
        print_success(success_msg)
