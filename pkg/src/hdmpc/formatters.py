#!/usr/bin/env python3
"""
hdmpc Output Formatters

Provides formatting utilities for certificates, step solutions, traces and
message statistics.
"""

from typing import Optional, Sequence

import numpy as np

# Import generic formatters and color utilities from the base library
from assistant_skills_lib.formatters import Colors, _colorize, format_json, format_table
from assistant_skills_lib.formatters import (
    print_error,
    print_info,
    print_success,
    print_warning,
)

from .certification import FAIL, PASS, CertificationReport
from .harness import MessageStats
from .mpc_loop import TraceRecord
from .outer_subgrad import OuterParams, StepSolution

colorize = _colorize

_STATUS_COLORS = {PASS: Colors.GREEN, FAIL: Colors.RED}


def format_vector(values: Sequence[float], precision: int = 6) -> str:
    """
    Format a vector as "[a, b, c]" with ``precision`` significant digits.
    """
    return "[" + ", ".join(f"{float(v):.{precision}g}" for v in np.asarray(values).reshape(-1)) + "]"


def format_certificate_report(report: CertificationReport) -> str:
    """
    Format a certification checklist for display.
    """
    lines = []
    for check in report.checks:
        status = _colorize(check.status.upper(), _STATUS_COLORS.get(check.status, Colors.YELLOW))
        value = f" = {check.value:.6g}" if check.value is not None else ""
        lines.append(f"{check.name + ':':<22}{status}  {check.detail}{value}")
    if report.gamma is not None:
        lines.append(f"{'gamma:':<22}{report.gamma:.6g}")
        lines.append(f"{'phi:':<22}{report.phi:.6g}")
    if report.L0 is not None:
        lines.append(f"{'L0:':<22}{report.L0:.6g}")
    verdict = "all checks pass" if report.passed else "certification failed"
    lines.append(f"{'Result:':<22}{verdict}")
    return "\n".join(lines)


def format_step_solution(solution: StepSolution, params: Optional[OuterParams] = None) -> str:
    """
    Format a step solution for display.
    """
    lines = [
        f"u_hat:        {format_vector(solution.u_hat)}",
        f"Cost:         {solution.f_value:.10g}",
        f"Violation:    {solution.violation:.3g}",
        f"Max g:        {solution.max_constraint:.6g}",
        f"Feasible:     {solution.feasible}",
        f"Outer iters:  {solution.k_used:,}",
        f"Sweeps:       {solution.total_inner_sweeps:,}",
    ]
    if params is not None:
        lines.extend(
            [
                f"k_bar:        {params.k_bar:,}",
                f"alpha:        {params.alpha_t:.6g}",
                f"eps:          {params.eps_t:.6g}",
                f"delta:        {params.delta_t:.6g}",
            ]
        )
    return "\n".join(lines)


def format_trace_summary(records: Sequence[TraceRecord]) -> str:
    """
    Format a closed-loop run summary.
    """
    if not records:
        return "No steps recorded."
    last = records[-1]
    lines = [
        f"Steps:        {len(records)}",
        f"First cost:   {records[0].f_value:.10g}",
        f"Final cost:   {last.f_value:.10g}",
        f"Final state:  {format_vector(last.x)}",
        f"Outer iters:  {sum(r.k_used for r in records):,}",
        f"Sweeps:       {sum(r.total_inner_sweeps for r in records):,}",
        f"Lyapunov:     {'ok' if all(r.lyapunov_ok for r in records) else 'VIOLATED'}",
    ]
    return "\n".join(lines)


def format_message_stats(stats: MessageStats) -> str:
    """
    Format harness message statistics as a table.
    """
    rows = [{"kind": kind, "count": f"{count:,}"} for kind, count in stats.counts.items()]
    rows.append({"kind": "total", "count": f"{stats.total:,}"})
    table = format_table(rows, columns=["kind", "count"])
    return f"{table}\nBytes:        {stats.nbytes:,}\nOuter iters:  {stats.outer_iterations:,}"


__all__ = [
    "Colors",
    "colorize",
    "format_certificate_report",
    "format_json",
    "format_message_stats",
    "format_step_solution",
    "format_table",
    "format_trace_summary",
    "format_vector",
    "print_error",
    "print_info",
    "print_success",
    "print_warning",
]
