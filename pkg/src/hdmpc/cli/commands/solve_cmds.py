"""Single-step solve and exact oracle commands for hdmpc CLI."""

from __future__ import annotations

from typing import Any, Dict, List, Optional

import click
import numpy as np

from hdmpc import (
    BoundViolatedError,
    ConvergedToOrigin,
    LoopContext,
    SlaterViolatedError,
    build_tightened,
    condense,
    dual_function_exact,
    format_message_stats,
    format_step_solution,
    format_vector,
    get_solver_options,
    initial_norm_bound,
    initial_state,
    load_config,
    message_stats,
    print_success,
    slater_certificate,
    solve_at_state,
    solve_constrained_qp_exact,
    write_message_log,
)

from ..cli_utils import (
    flag_override,
    get_output_format,
    handle_cli_errors,
    output_results,
    state_or_default,
    sweep_executor,
    with_solver_flags,
)

WEAK_DUALITY_TOL = 1e-9


@click.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--state", "-x", default=None, help="State override, e.g. 1,-0.5.")
@with_solver_flags
@click.option(
    "--log-out",
    type=click.Path(dir_okay=False),
    default=None,
    help="Write the binary message log (implies --distributed).",
)
@click.pass_context
@handle_cli_errors
def solve(
    ctx: click.Context,
    config_path: str,
    state: Optional[str],
    distributed: bool,
    single_thread: Optional[bool],
    early_exit: bool,
    log_out: Optional[str],
) -> None:
    """Solve one MPC step with certified iteration counts.

    Prints the averaged input sequence, its cost and constraint violation,
    k_bar and the total number of Jacobi sweeps. With --distributed the step
    runs through the coordinator/agent harness and the message counts are
    printed as well.

    Example:
        hdmpc solve twin.json
        hdmpc solve twin.json --state 0.5,0.2 --distributed
    """
    doc = load_config(config_path)
    options = get_solver_options(
        doc.solver,
        single_thread=single_thread,
        early_exit=flag_override(early_exit),
        distributed=flag_override(distributed or log_out is not None),
    )
    x = state_or_default(state, doc.x0)
    if float(np.linalg.norm(x)) <= options.convergence_tol:
        raise ConvergedToOrigin(step=0)
    loop = LoopContext.build(doc.network, options)
    start = initial_state(loop, x, doc.u_bar0, doc.delta0)
    with sweep_executor(options) as executor:
        outcome = solve_at_state(start, loop, executor)

    data: Dict[str, Any] = {
        "solution": outcome.solution.to_dict(),
        "params": outcome.params.to_dict(),
    }
    sections = [format_step_solution(outcome.solution, outcome.params)]
    if outcome.log is not None:
        stats = message_stats(outcome.log)
        data["messages"] = stats.to_dict()
        sections.append(format_message_stats(stats))
    output_results(data, get_output_format(ctx), text="\n\n".join(sections))

    if log_out is not None and outcome.log is not None:
        written = write_message_log(log_out, outcome.log)
        if get_output_format(ctx) == "text":
            print_success(f"Wrote {written:,} bytes to {log_out}")


@click.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--state", "-x", default=None, help="State override, e.g. 1,-0.5.")
@click.option(
    "--tightened", is_flag=True, help="Also solve the tightened problem exactly."
)
@click.option(
    "--samples",
    "-k",
    type=click.IntRange(min=0),
    default=0,
    help="Number of random dual vectors for the weak-duality check.",
)
@click.option("--seed", type=int, default=None, help="Seed for the dual samples.")
@click.pass_context
@handle_cli_errors
def oracle(
    ctx: click.Context,
    config_path: str,
    state: Optional[str],
    tightened: bool,
    samples: int,
    seed: Optional[int],
) -> None:
    """Solve the step problem exactly by active-set enumeration.

    Prints f*, optionally the tightened optimum f'* and the exact dual
    values q'(mu) at seeded random mu >= 0, which must not exceed f'*.

    Example:
        hdmpc oracle twin.json --tightened --samples 20
    """
    doc = load_config(config_path)
    options = get_solver_options(doc.solver, seed=seed)
    x = state_or_default(state, doc.x0)
    p = condense(doc.network)
    u_star, f_star = solve_constrained_qp_exact(p, x)
    data: Dict[str, Any] = {"f_star": f_star, "u_star": [float(v) for v in u_star]}
    lines = [f"f*:           {f_star:.17g}", f"u*:           {format_vector(u_star)}"]

    if tightened or samples:
        slater = slater_certificate(p, doc.u_bar0, x)
        if not slater.is_strict:
            raise SlaterViolatedError(min_margin=slater.min_margin)
        L = initial_norm_bound(p, x, options.l0_vertex_limit)
        tp = build_tightened(p, x, slater, L, options.tightening_ratio)
        _, f_tight = solve_constrained_qp_exact(tp)
        data["c_t"] = tp.c_t
        data["f_star_tightened"] = f_tight
        lines.append(f"c_t:          {tp.c_t:.6g}")
        lines.append(f"f'*:          {f_tight:.17g}")

        rng = np.random.default_rng(options.seed)
        duals: List[float] = []
        for k in range(samples):
            mu = rng.exponential(1.0, size=p.m_c)
            q = dual_function_exact(tp, mu)
            if q > f_tight + WEAK_DUALITY_TOL * (1.0 + abs(f_tight)):
                raise BoundViolatedError(bound="weak duality", k=k, lhs=q, rhs=f_tight)
            duals.append(q)
        if samples:
            data["dual_values"] = duals
            lines.append(f"max q'(mu):   {max(duals):.17g}  ({samples} samples)")

    output_results(data, get_output_format(ctx), text="\n".join(lines))
