"""Instance validation and certification commands for hdmpc CLI."""

from __future__ import annotations

import sys

import click

from hdmpc import (
    certify_instance,
    condense,
    format_certificate_report,
    get_solver_options,
    instance_hash,
    load_config,
)
from hdmpc.error_handler import EXIT_CERTIFICATION

from ..cli_utils import get_output_format, handle_cli_errors, output_results


@click.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.pass_context
@handle_cli_errors
def validate(ctx: click.Context, config_path: str) -> None:
    """Load and validate an instance document.

    Exits 0 when the document is valid and 2 otherwise.

    Example:
        hdmpc validate twin.json
    """
    doc = load_config(config_path)
    p = condense(doc.network)
    summary = {
        "valid": True,
        "subsystems": doc.network.M,
        "horizon": doc.network.N,
        "state_dim": doc.network.state_dim,
        "inputs": p.n_u,
        "constraints": p.m_c,
        "instance_hash": instance_hash(doc),
    }
    text = "\n".join(
        [
            f"Subsystems:   {doc.network.M}",
            f"Horizon:      {doc.network.N}",
            f"States:       {doc.network.state_dim}",
            f"Inputs:       {p.n_u}",
            f"Constraints:  {p.m_c}",
        ]
    )
    output_results(
        summary,
        get_output_format(ctx),
        text=text,
        success_msg=f"{config_path} is a valid instance",
    )


@click.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.pass_context
@handle_cli_errors
def certify(ctx: click.Context, config_path: str) -> None:
    """Run the certification checklist.

    Checks the Schur property of A+BK, invariance of the terminal set and
    admissibility of its inputs, strict feasibility of u_bar0, the initial
    norm bound and the weak coupling condition. The cost-decrease assumption
    is checked at run time and reported as such.

    Exits 0 when every check passes and 3 otherwise.

    Example:
        hdmpc certify twin.json
    """
    doc = load_config(config_path)
    report = certify_instance(doc, get_solver_options(doc.solver))
    output_results(
        report.to_dict(),
        get_output_format(ctx),
        text=format_certificate_report(report),
    )
    if not report.passed:
        sys.exit(EXIT_CERTIFICATION)
