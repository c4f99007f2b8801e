#!/usr/bin/env python3
"""
Closed-loop MPC driver

Per step: tighten around the current Slater vector, check the cost-decrease
assumption, solve (monolithically or through the coordinator/agent harness),
apply the first input, advance the plant, shift the Slater vector and update
the norm bound.
"""

from __future__ import annotations

import logging
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .condense import CondensedProblem, condense, eval_cost
from .config_manager import SolverOptions
from .error_handler import (
    AssumptionFourViolatedError,
    ConvergedToOrigin,
    DegenerateDeltaError,
    LyapunovViolationError,
    ShiftedSlaterViolatedError,
    SlaterViolatedError,
    ValidationError,
)
from .harness import NetworkLog, message_stats, run_distributed_step
from .inner_jacobi import (
    BlockPartition,
    ContractionCertificate,
    certify_contraction,
    partition_problem,
)
from .model import NetworkSpec, assemble_aggregate
from .outer_subgrad import (
    OuterParams,
    StepSolution,
    compute_delta,
    compute_step_params,
    solve_tightened_step,
)
from .tighten import (
    SlaterCertificate,
    TightenedProblem,
    build_tightened,
    initial_norm_bound,
    shift_slater,
    slater_certificate,
    update_norm_bound,
)

logger = logging.getLogger(__name__)

TraceSink = Callable[["TraceRecord"], None]


@dataclass(frozen=True, eq=False)
class MpcState:
    """Closed-loop state at the start of step t.

    x_prev and u_prev_applied are None at t = 0, where delta0 stands in for
    the cost-decrease budget.
    """

    t: int
    x: np.ndarray
    slater: SlaterCertificate
    L: float
    f_prev: Optional[float] = None
    x_prev: Optional[np.ndarray] = None
    u_prev_applied: Optional[np.ndarray] = None
    delta0: float = 0.0


@dataclass(frozen=True, eq=False)
class TraceRecord:
    """Diagnostics of one closed-loop step."""

    t: int
    f_value: float
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    u_applied: np.ndarray = field(default_factory=lambda: np.zeros(0))
    violation_norm: float = 0.0
    delta_t: float = 0.0
    alpha_t: float = 0.0
    eps_t: float = 0.0
    k_bar: int = 0
    k_used: int = 0
    total_inner_sweeps: int = 0
    c_t: float = 0.0
    gamma_t: float = 0.0
    L_t: float = 0.0
    Lp_t: float = 0.0
    f_slater: float = 0.0
    lyapunov_ok: bool = True
    message_counts: Optional[Dict[str, int]] = None
    outer_records: Tuple[Dict[str, Any], ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "t": self.t,
            "x": [float(v) for v in self.x],
            "u_applied": [float(v) for v in self.u_applied],
            "f_value": self.f_value,
            "violation_norm": self.violation_norm,
            "delta_t": self.delta_t,
            "alpha_t": self.alpha_t,
            "eps_t": self.eps_t,
            "k_bar": self.k_bar,
            "k_used": self.k_used,
            "total_inner_sweeps": self.total_inner_sweeps,
            "c_t": self.c_t,
            "gamma_t": self.gamma_t,
            "L_t": self.L_t,
            "Lp_t": self.Lp_t,
            "f_slater": self.f_slater,
            "lyapunov_ok": self.lyapunov_ok,
        }
        if self.message_counts is not None:
            data["message_counts"] = dict(self.message_counts)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TraceRecord":
        return cls(
            t=int(data["t"]),
            f_value=float(data["f_value"]),
            x=np.asarray(data.get("x", []), dtype=float),
            u_applied=np.asarray(data.get("u_applied", []), dtype=float),
            violation_norm=float(data.get("violation_norm", 0.0)),
            delta_t=float(data.get("delta_t", 0.0)),
            alpha_t=float(data.get("alpha_t", 0.0)),
            eps_t=float(data.get("eps_t", 0.0)),
            k_bar=int(data.get("k_bar", 0)),
            k_used=int(data.get("k_used", 0)),
            total_inner_sweeps=int(data.get("total_inner_sweeps", 0)),
            c_t=float(data.get("c_t", 0.0)),
            gamma_t=float(data.get("gamma_t", 0.0)),
            L_t=float(data.get("L_t", 0.0)),
            Lp_t=float(data.get("Lp_t", 0.0)),
            f_slater=float(data.get("f_slater", 0.0)),
            lyapunov_ok=bool(data.get("lyapunov_ok", True)),
            message_counts=data.get("message_counts"),
        )


@dataclass(frozen=True, eq=False)
class LoopContext:
    """Step-invariant data shared by every closed-loop step."""

    network: NetworkSpec
    problem: CondensedProblem
    cert: ContractionCertificate
    partition: BlockPartition
    options: SolverOptions

    @classmethod
    def build(cls, network: NetworkSpec, options: Optional[SolverOptions] = None) -> "LoopContext":
        opts = options or SolverOptions()
        p = condense(network)
        return cls(
            network=network,
            problem=p,
            cert=certify_contraction(p),
            partition=partition_problem(p, opts.face_enumeration_cap),
            options=opts,
        )


def initial_state(
    ctx: LoopContext,
    x0: np.ndarray,
    u_bar0: np.ndarray,
    delta0: Optional[float] = None,
) -> MpcState:
    """State at t = 0 with L_0 and the default delta0 = x0'Qx0 / 2.

    Raises:
        ValidationError: If x0 lies outside X
        SlaterViolatedError: If u_bar0 is not strictly feasible
    """
    network = ctx.network
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (network.state_dim,):
        raise ValidationError(f"expected length {network.state_dim}", field="x0")
    if not network.X.contains(x0):
        raise ValidationError("initial state lies outside X", field="x0")
    slater = slater_certificate(ctx.problem, u_bar0, x0)
    if not slater.is_strict:
        raise SlaterViolatedError(min_margin=slater.min_margin)
    if delta0 is None:
        Q = assemble_aggregate(network).Q
        delta0 = 0.5 * float(x0 @ Q @ x0)
    elif not delta0 > 0.0:
        raise ValidationError("must be positive", field="delta0")
    L0 = initial_norm_bound(ctx.problem, x0, ctx.options.l0_vertex_limit)
    logger.debug("initial state: L0=%.6g delta0=%.6g margin=%.6g", L0, delta0, slater.min_margin)
    return MpcState(t=0, x=x0, slater=slater, L=L0, delta0=delta0)


def _step_delta(ctx: LoopContext, state: MpcState) -> float:
    if state.x_prev is None or state.u_prev_applied is None:
        if state.delta0 <= 0.0:
            raise DegenerateDeltaError(delta=state.delta0)
        return state.delta0
    model = assemble_aggregate(ctx.network)
    return compute_delta(model.Q, model.R, state.x_prev, state.u_prev_applied)


@dataclass(frozen=True, eq=False)
class StepOutcome:
    """Everything one optimization step produced, before the plant moves."""

    tightened: TightenedProblem
    params: OuterParams
    solution: StepSolution
    delta_t: float
    f_slater: float
    log: Optional[NetworkLog] = None


def solve_at_state(
    state: MpcState,
    ctx: LoopContext,
    executor: Optional[Executor] = None,
) -> StepOutcome:
    """Tighten, check the cost-decrease assumption and solve at state.x.

    Raises:
        ConvergedToOrigin: If ||x|| is below the convergence tolerance or the
            cost-decrease budget degenerates
        AssumptionFourViolatedError: If f_prev - f(u_bar_t, x_t) <= delta_t
        FeasibilityCertificateFailedError: Propagated from the solver
    """
    opts = ctx.options
    p = ctx.problem
    x = state.x
    if float(np.linalg.norm(x)) <= opts.convergence_tol:
        raise ConvergedToOrigin(step=state.t)
    try:
        delta_t = _step_delta(ctx, state)
    except DegenerateDeltaError:
        raise ConvergedToOrigin(step=state.t)

    tightened = build_tightened(p, x, state.slater, state.L, opts.tightening_ratio)
    f_slater = eval_cost(p, state.slater.u_bar, x)
    if state.f_prev is not None:
        decrease = state.f_prev - f_slater
        if not decrease > delta_t:
            raise AssumptionFourViolatedError(step=state.t, decrease=decrease, delta=delta_t)

    params = compute_step_params(tightened, delta_t)
    log: Optional[NetworkLog] = None
    if opts.distributed:
        solution, log = run_distributed_step(
            tightened, params, ctx.cert, opts, ctx.partition, executor
        )
    else:
        solution = solve_tightened_step(
            tightened, params, ctx.cert, opts, ctx.partition, executor
        )
    return StepOutcome(tightened, params, solution, delta_t, f_slater, log)


def mpc_step(
    state: MpcState,
    ctx: LoopContext,
    executor: Optional[Executor] = None,
) -> Tuple[MpcState, TraceRecord]:
    """Advance the closed loop by one step.

    Raises:
        ConvergedToOrigin: If ||x|| is below the convergence tolerance or the
            cost-decrease budget degenerates
        AssumptionFourViolatedError: If f_prev - f(u_bar_t, x_t) <= delta_t
        FeasibilityCertificateFailedError: Propagated from the solver
        ShiftedSlaterViolatedError: If the shifted solution is not strictly
            feasible at the next state
    """
    p = ctx.problem
    x = state.x
    outcome = solve_at_state(state, ctx, executor)
    tightened, params, solution = outcome.tightened, outcome.params, outcome.solution
    delta_t, f_slater = outcome.delta_t, outcome.f_slater
    counts: Optional[Dict[str, int]] = None
    if outcome.log is not None:
        counts = message_stats(outcome.log).counts

    lyapunov_ok = state.f_prev is None or solution.f_value < state.f_prev
    model = assemble_aggregate(ctx.network)
    u_first = p.to_time_major(solution.u_hat)[0]
    x_next = model.A @ x + model.B @ u_first
    u_bar_next = shift_slater(ctx.network, p, solution.u_hat, x)
    slater_next = slater_certificate(p, u_bar_next, x_next)
    if not slater_next.is_strict:
        raise ShiftedSlaterViolatedError(step=state.t, min_margin=slater_next.min_margin)
    L_next = update_norm_bound(state.L, p.Xi, x_next, x)

    record = TraceRecord(
        t=state.t,
        f_value=solution.f_value,
        x=x,
        u_applied=u_first,
        violation_norm=solution.violation,
        delta_t=delta_t,
        alpha_t=params.alpha_t,
        eps_t=params.eps_t,
        k_bar=params.k_bar,
        k_used=solution.k_used,
        total_inner_sweeps=solution.total_inner_sweeps,
        c_t=tightened.c_t,
        gamma_t=tightened.gamma_t,
        L_t=tightened.L_t,
        Lp_t=tightened.Lp_t,
        f_slater=f_slater,
        lyapunov_ok=lyapunov_ok,
        message_counts=counts,
        outer_records=tuple(it.to_record() for it in solution.history),
    )
    next_state = MpcState(
        t=state.t + 1,
        x=x_next,
        slater=slater_next,
        L=L_next,
        f_prev=solution.f_value,
        x_prev=x,
        u_prev_applied=u_first,
        delta0=state.delta0,
    )
    logger.info(
        "step %d: f=%.6g k_bar=%d sweeps=%d", state.t, solution.f_value, params.k_bar,
        solution.total_inner_sweeps,
    )
    return next_state, record


def simulate(
    network: NetworkSpec,
    x0: np.ndarray,
    u_bar0: np.ndarray,
    steps: int,
    options: Optional[SolverOptions] = None,
    delta0: Optional[float] = None,
    sink: Optional[TraceSink] = None,
) -> List[TraceRecord]:
    """Run up to ``steps`` closed-loop steps, stopping early at the origin.

    Raises:
        LyapunovViolationError: If the cost fails to decrease strictly
        AssumptionFourViolatedError: Propagated from mpc_step
    """
    if steps < 0:
        raise ValidationError("must be non-negative", field="steps")
    ctx = LoopContext.build(network, options)
    state = initial_state(ctx, x0, u_bar0, delta0)
    records: List[TraceRecord] = []
    executor: Optional[ThreadPoolExecutor] = None
    if not ctx.options.single_thread:
        executor = ThreadPoolExecutor(max_workers=ctx.options.max_workers)
    try:
        for _ in range(steps):
            try:
                state, record = mpc_step(state, ctx, executor)
            except ConvergedToOrigin as e:
                logger.info("converged to the origin at step %s", e.step)
                break
            if not record.lyapunov_ok:
                raise LyapunovViolationError(
                    step=record.t, previous=records[-1].f_value, current=record.f_value
                )
            records.append(record)
            if sink is not None:
                sink(record)
    finally:
        if executor is not None:
            executor.shutdown(wait=True)
    return records


@dataclass(frozen=True)
class CostDecreaseReport:
    """Consecutive decreases f_{t-1} - f_t and the budget slack per step."""

    margins: Tuple[float, ...]
    budget_slack: Tuple[float, ...]

    @property
    def min_margin(self) -> float:
        return min(self.margins)


def check_cost_decrease(trace: Sequence[TraceRecord]) -> CostDecreaseReport:
    """Confirm strict decrease of f between consecutive records.

    budget_slack holds delta_t - (alpha_t L'_t^2 / 2 + eps_t) for each later
    record, which is zero up to rounding with the default step parameters.

    Raises:
        ValidationError: If fewer than two records are given
        LyapunovViolationError: At the first non-decreasing pair
    """
    if len(trace) < 2:
        raise ValidationError("at least two records are required", field="trace")
    margins: List[float] = []
    slack: List[float] = []
    for prev, cur in zip(trace, trace[1:]):
        if not cur.f_value < prev.f_value:
            raise LyapunovViolationError(step=cur.t, previous=prev.f_value, current=cur.f_value)
        margins.append(prev.f_value - cur.f_value)
        slack.append(cur.delta_t - (cur.alpha_t * cur.Lp_t ** 2 / 2.0 + cur.eps_t))
    return CostDecreaseReport(margins=tuple(margins), budget_slack=tuple(slack))
