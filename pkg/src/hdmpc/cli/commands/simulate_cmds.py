"""Closed-loop simulation command for hdmpc CLI."""

from __future__ import annotations

from typing import Optional

import click

from hdmpc import (
    TraceWriter,
    format_trace_summary,
    get_solver_options,
    instance_hash,
    load_config,
    simulate as run_simulation,
)

from ..cli_utils import (
    flag_override,
    get_output_format,
    handle_cli_errors,
    output_results,
    with_solver_flags,
)


@click.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option(
    "--steps", "-n", type=click.IntRange(min=0), required=True, help="Closed-loop steps."
)
@click.option(
    "--out", "out_path", type=click.Path(dir_okay=False), required=True, help="Trace file."
)
@with_solver_flags
@click.option(
    "--outer-records", is_flag=True, help="Add per-outer-iteration records to the trace."
)
@click.pass_context
@handle_cli_errors
def simulate(
    ctx: click.Context,
    config_path: str,
    steps: int,
    out_path: str,
    distributed: bool,
    single_thread: Optional[bool],
    early_exit: bool,
    outer_records: bool,
) -> None:
    """Simulate the closed loop and write a JSON Lines trace.

    Stops early when the state reaches the origin. Exits 4 when a runtime
    check (cost decrease, feasibility of the averaged input) fails; the trace
    then holds every step completed before the failure.

    Example:
        hdmpc simulate twin.json --steps 10 --out trace.jsonl
    """
    doc = load_config(config_path)
    options = get_solver_options(
        doc.solver,
        single_thread=single_thread,
        early_exit=flag_override(early_exit),
        distributed=flag_override(distributed),
        record_history=flag_override(outer_records),
    )
    parameters = {"steps": steps, "solver": options.to_dict()}
    with TraceWriter(out_path, instance_hash(doc), parameters, outer_records) as writer:
        records = run_simulation(
            doc.network,
            doc.x0,
            doc.u_bar0,
            steps,
            options=options,
            delta0=doc.delta0,
            sink=writer,
        )

    summary = {
        "steps": len(records),
        "out": out_path,
        "final_cost": records[-1].f_value if records else None,
        "lyapunov_ok": all(r.lyapunov_ok for r in records),
    }
    output_results(
        summary,
        get_output_format(ctx),
        text=format_trace_summary(records),
        success_msg=f"Wrote {writer.steps_written} steps to {out_path}",
    )
