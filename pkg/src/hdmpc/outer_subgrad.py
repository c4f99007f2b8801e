#!/usr/bin/env python3
"""
Outer dual subgradient loop

One MPC step: k_bar projected subgradient updates of the dual vector of the
tightened problem, each preceded by an inexact Jacobi minimization of the
Lagrangian, followed by primal averaging. The averaged input is strictly
feasible for the original constraints once k_bar iterations have run.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import Executor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .condense import eval_constraints, eval_cost
from .config_manager import SolverOptions
from .error_handler import (
    BoundViolatedError,
    DegenerateDeltaError,
    FeasibilityCertificateFailedError,
    ValidationError,
)
from .inner_jacobi import (
    BlockPartition,
    ContractionCertificate,
    partition_problem,
    solve_lagrangian,
)
from .tighten import TightenedProblem

logger = logging.getLogger(__name__)

DELTA_THRESHOLD = 1e-12


# =============================================================================
# Step parameters
# =============================================================================


@dataclass(frozen=True)
class OuterParams:
    """Step size, inner tolerance and outer iteration count for one MPC step."""

    delta_t: float
    alpha_t: float
    eps_t: float
    k_bar: int
    gamma_t: float
    c_t: float
    Lp_t: float

    def to_dict(self) -> dict:
        return {
            "delta_t": self.delta_t,
            "alpha_t": self.alpha_t,
            "eps_t": self.eps_t,
            "k_bar": self.k_bar,
            "gamma_t": self.gamma_t,
            "c_t": self.c_t,
            "Lp_t": self.Lp_t,
        }


def compute_delta(
    Q: np.ndarray, R: np.ndarray, x_prev: np.ndarray, u_prev_applied: np.ndarray
) -> float:
    """Delta_t = x'Qx + u'Ru at the previous state and applied input.

    Raises:
        DegenerateDeltaError: If the result is at or below 1e-12
    """
    x = np.asarray(x_prev, dtype=float).reshape(-1)
    u = np.asarray(u_prev_applied, dtype=float).reshape(-1)
    delta = float(x @ Q @ x + u @ R @ u)
    if delta <= DELTA_THRESHOLD:
        raise DegenerateDeltaError(delta=delta)
    return delta


def outer_iterations_needed(
    params: OuterParams,
    tightened: Optional[TightenedProblem] = None,
    f_at_slater: Optional[float] = None,
) -> int:
    """ceil((1/(alpha c)) * (3 f(u_bar)/gamma + alpha L'^2/(2 gamma) + alpha L')).

    ``f_at_slater`` defaults to f(u_bar_t, x_t) evaluated on ``tightened``.
    """
    if f_at_slater is None:
        if tightened is None:
            raise ValidationError("either tightened or f_at_slater is required", field="f_at_slater")
        f_at_slater = eval_cost(tightened.base, tightened.slater.u_bar, tightened.x_t)
    a, g, c, Lp = params.alpha_t, params.gamma_t, params.c_t, params.Lp_t
    if not (a > 0.0 and g > 0.0 and c > 0.0):
        raise ValidationError("alpha, gamma and c must be positive", field="params")
    total = (3.0 / g) * f_at_slater + a * Lp * Lp / (2.0 * g) + a * Lp
    return max(1, math.ceil(total / (a * c)))


def compute_step_params(tightened: TightenedProblem, delta_t: float) -> OuterParams:
    """alpha = Delta / L'^2, eps = Delta / 2 and the matching k_bar.

    Raises:
        ValidationError: If Delta or L' is not positive
    """
    if not delta_t > 0.0:
        raise ValidationError("must be positive", field="delta_t")
    Lp = tightened.Lp_t
    if not Lp > 0.0:
        raise ValidationError("must be positive", field="Lp_t")
    alpha = delta_t / (Lp * Lp)
    eps = delta_t / 2.0
    # alpha L'^2 / 2 + eps == delta up to rounding
    assert alpha * Lp * Lp / 2.0 + eps <= delta_t * (1.0 + 1e-12)
    params = OuterParams(
        delta_t=delta_t,
        alpha_t=alpha,
        eps_t=eps,
        k_bar=1,
        gamma_t=tightened.gamma_t,
        c_t=tightened.c_t,
        Lp_t=Lp,
    )
    params = replace(params, k_bar=outer_iterations_needed(params, tightened))
    logger.debug(
        "step params: delta=%.6g alpha=%.6g eps=%.6g k_bar=%d",
        delta_t,
        alpha,
        eps,
        params.k_bar,
    )
    return params


# =============================================================================
# Dual iteration
# =============================================================================


def dual_update(mu: np.ndarray, alpha_t: float, d: np.ndarray) -> np.ndarray:
    """Projected step max(0, mu + alpha d)."""
    return np.maximum(0.0, np.asarray(mu, dtype=float) + alpha_t * np.asarray(d, dtype=float))


def primal_average(primal_sum: np.ndarray, k: int) -> np.ndarray:
    """(1/k) * sum of the first k primal iterates."""
    if k < 1:
        raise ValidationError("must be at least 1", field="k")
    return np.asarray(primal_sum, dtype=float) / k


def violation_bound(params: OuterParams, k: int, f_at_slater: float) -> float:
    """Right-hand side of the violation bound at outer count k."""
    a, g, Lp = params.alpha_t, params.gamma_t, params.Lp_t
    return ((3.0 / g) * f_at_slater + a * Lp * Lp / (2.0 * g) + a * Lp) / (k * a)


def tightened_constraint_sum(
    partition: BlockPartition, offset: np.ndarray, u: np.ndarray
) -> np.ndarray:
    """offset + sum_i Theta_i u_i, accumulated in block order."""
    g = offset.copy()
    for blk in partition.blocks:
        g = g + blk.contribution(u[blk.sl])
    return g


@dataclass(frozen=True, eq=False)
class OuterIterate:
    """Diagnostics for outer iteration k (1-based: k iterates averaged)."""

    k: int
    u: np.ndarray
    mu: np.ndarray
    d: np.ndarray
    inner_sweeps: int
    lipschitz: float
    lagrangian: float
    dual_lower: float
    violation: float
    violation_rhs: float
    f_hat: float

    def to_record(self) -> dict:
        return {
            "k": self.k,
            "violation": self.violation,
            "violation_rhs": self.violation_rhs,
            "dual_lower": self.dual_lower,
            "inner_sweeps": self.inner_sweeps,
            "lipschitz": self.lipschitz,
        }


@dataclass
class DualState:
    """Mutable state of the outer loop; single owner."""

    mu: np.ndarray
    k: int = 0
    primal_sum: Optional[np.ndarray] = None
    constraint_sum: Optional[np.ndarray] = None
    history: List[OuterIterate] = field(default_factory=list)

    @classmethod
    def start(cls, n_u: int, m_c: int) -> "DualState":
        return cls(mu=np.zeros(m_c), primal_sum=np.zeros(n_u), constraint_sum=np.zeros(m_c))


@dataclass(frozen=True, eq=False)
class StepSolution:
    """Averaged primal solution of one MPC step."""

    u_hat: np.ndarray
    f_value: float
    violation: float
    max_constraint: float
    k_used: int
    total_inner_sweeps: int
    feasible: bool
    mu: np.ndarray
    history: Tuple[OuterIterate, ...] = ()

    def to_dict(self) -> dict:
        return {
            "u_hat": [float(v) for v in self.u_hat],
            "f_value": self.f_value,
            "violation": self.violation,
            "max_constraint": self.max_constraint,
            "k_used": self.k_used,
            "total_inner_sweeps": self.total_inner_sweeps,
            "feasible": self.feasible,
        }


def finish_step(
    tightened: TightenedProblem,
    u_hat: np.ndarray,
    k_used: int,
    total_sweeps: int,
    mu: np.ndarray,
    history: Sequence[OuterIterate] = (),
) -> StepSolution:
    """Certify strict feasibility of the averaged input against the original g.

    Raises:
        FeasibilityCertificateFailedError: If some g_j(u_hat, x_t) >= 0
    """
    g = eval_constraints(tightened.base, u_hat, tightened.x_t)
    worst = float(g.max()) if g.size else -math.inf
    if g.size and not worst < 0.0:
        raise FeasibilityCertificateFailedError(worst=worst, row=int(np.argmax(g)))
    return StepSolution(
        u_hat=u_hat,
        f_value=eval_cost(tightened.base, u_hat, tightened.x_t),
        violation=float(np.linalg.norm(np.maximum(g, 0.0))),
        max_constraint=worst,
        k_used=k_used,
        total_inner_sweeps=total_sweeps,
        feasible=True,
        mu=mu,
        history=tuple(history),
    )


def solve_tightened_step(
    tightened: TightenedProblem,
    params: OuterParams,
    cert: ContractionCertificate,
    options: Optional[SolverOptions] = None,
    partition: Optional[BlockPartition] = None,
    executor: Optional[Executor] = None,
) -> StepSolution:
    """Run the outer loop for k_bar iterations and return the averaged input.

    Raises:
        FeasibilityCertificateFailedError: If the average is not strictly feasible
        WeakCouplingViolatedError: If the contraction certificate did not pass
    """
    opts = options or SolverOptions()
    p = tightened.base
    partition = partition or partition_problem(p, opts.face_enumeration_cap)
    x_t = tightened.x_t
    offset = tightened.constraint_offset
    state = DualState.start(p.n_u, p.m_c)
    assert state.primal_sum is not None and state.constraint_sum is not None
    f_bar = eval_cost(p, tightened.slater.u_bar, x_t) if opts.record_history else 0.0
    u: Optional[np.ndarray] = None
    total_sweeps = 0

    for _ in range(params.k_bar):
        inner = solve_lagrangian(
            partition, x_t, state.mu, params.eps_t, cert, warm_start=u, executor=executor
        )
        u = inner.u
        total_sweeps += inner.sweeps
        d = tightened_constraint_sum(partition, offset, u)
        state.primal_sum = state.primal_sum + u
        state.constraint_sum = state.constraint_sum + d
        state.k += 1
        g_hat = state.constraint_sum / state.k
        if opts.record_history:
            u_hat = state.primal_sum / state.k
            lagr = eval_cost(p, u, x_t) + float(state.mu @ d)
            state.history.append(
                OuterIterate(
                    k=state.k,
                    u=u,
                    mu=state.mu,
                    d=d,
                    inner_sweeps=inner.sweeps,
                    lipschitz=inner.lipschitz,
                    lagrangian=lagr,
                    dual_lower=lagr - params.eps_t,
                    violation=float(np.linalg.norm(np.maximum(g_hat, 0.0))),
                    violation_rhs=violation_bound(params, state.k, f_bar),
                    f_hat=eval_cost(p, u_hat, x_t),
                )
            )
        state.mu = dual_update(state.mu, params.alpha_t, d)
        if opts.early_exit and np.all(g_hat <= 0.0):
            logger.warning("early exit after %d of %d outer iterations", state.k, params.k_bar)
            break

    logger.debug("outer loop: k=%d sweeps=%d", state.k, total_sweeps)
    return finish_step(
        tightened,
        primal_average(state.primal_sum, state.k),
        state.k,
        total_sweeps,
        state.mu,
        state.history,
    )


# =============================================================================
# Bound checks
# =============================================================================


@dataclass(frozen=True)
class BoundsReport:
    """Worst observed slack of the violation and cost bounds."""

    checked: int
    worst_violation_slack: float
    worst_cost_slack: float


def check_bounds(
    history: Sequence[OuterIterate],
    params: OuterParams,
    f_star_tight: float,
    f_at_slater: float,
    rel_tol: float = 1e-8,
) -> BoundsReport:
    """Verify the violation and cost bounds at every recorded outer count.

    Args:
        history: Recorded outer iterates
        params: Step parameters used for the run
        f_star_tight: Exact optimum of the tightened problem
        f_at_slater: f(u_bar_t, x_t)
        rel_tol: Relative tolerance on both sides

    Raises:
        BoundViolatedError: With k and both sides of the failing inequality
    """
    cost_rhs = f_star_tight + params.alpha_t * params.Lp_t ** 2 / 2.0 + params.eps_t
    worst_v = math.inf
    worst_c = math.inf
    for it in history:
        v_rhs = violation_bound(params, it.k, f_at_slater)
        if it.violation > v_rhs + rel_tol * max(1.0, abs(v_rhs)):
            raise BoundViolatedError(bound="violation", k=it.k, lhs=it.violation, rhs=v_rhs)
        if it.f_hat > cost_rhs + rel_tol * max(1.0, abs(cost_rhs)):
            raise BoundViolatedError(bound="cost", k=it.k, lhs=it.f_hat, rhs=cost_rhs)
        worst_v = min(worst_v, v_rhs - it.violation)
        worst_c = min(worst_c, cost_rhs - it.f_hat)
    return BoundsReport(
        checked=len(history), worst_violation_slack=worst_v, worst_cost_slack=worst_c
    )
