#!/usr/bin/env python3
"""
Exact reference solvers

Enumeration-based solvers for desk-scale instances: the box QP behind the
dual function, the fully constrained step problem, and exact dual values.
They are exact or they refuse (InstanceTooLargeError); they never
approximate.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple, Union

import numpy as np

from .condense import CondensedProblem, eval_cost
from .error_handler import InfeasibleError, InstanceTooLargeError, ValidationError
from .tighten import TightenedProblem

logger = logging.getLogger(__name__)

BOX_QP_CAP = 16
CONSTRAINED_ROW_CAP = 20
KKT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class KktCandidate:
    """A candidate optimum for one guessed active set."""

    active_set: Tuple[int, ...]
    u: np.ndarray
    value: float
    feasible: bool
    multipliers: np.ndarray

    @property
    def multipliers_ok(self) -> bool:
        return bool(np.all(self.multipliers >= -KKT_TOL))


def _tol(scale: float) -> float:
    return KKT_TOL * (1.0 + scale)


def _box_patterns(n: int) -> Iterator[Tuple[int, ...]]:
    for fixed in range(n + 1):
        for idx in itertools.combinations(range(n), fixed):
            for signs in itertools.product((-1, 1), repeat=fixed):
                pattern = [0] * n
                for j, s in zip(idx, signs):
                    pattern[j] = s
                yield tuple(pattern)


def solve_box_qp_exact(
    H: np.ndarray,
    linear: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    cap: int = BOX_QP_CAP,
) -> Tuple[np.ndarray, float]:
    """Global minimizer of u'Hu + linear'u over the box, by face enumeration.

    Raises:
        InstanceTooLargeError: If the dimension exceeds ``cap``
    """
    H = np.asarray(H, dtype=float)
    linear = np.asarray(linear, dtype=float).reshape(-1)
    lo = np.asarray(lo, dtype=float).reshape(-1)
    hi = np.asarray(hi, dtype=float).reshape(-1)
    n = linear.size
    if n > cap:
        raise InstanceTooLargeError(size=n, cap=cap)
    Q = 2.0 * H
    reach = float(np.abs(np.r_[lo, hi]).max(initial=0.0))
    tol = _tol(float(np.abs(Q).max(initial=0.0)) * reach + float(np.abs(linear).max(initial=0.0)))
    for pattern in _box_patterns(n):
        pat = np.array(pattern)
        free = pat == 0
        u = np.where(pat < 0, lo, np.where(pat > 0, hi, 0.0))
        if free.any():
            rhs = -(linear[free] + Q[np.ix_(free, ~free)] @ u[~free])
            u[free] = np.linalg.solve(Q[np.ix_(free, free)], rhs)
        grad = Q @ u + linear
        candidate = KktCandidate(
            active_set=tuple(int(j) for j in np.flatnonzero(~free)),
            u=u,
            value=float(u @ H @ u + linear @ u),
            feasible=bool(np.all(u >= lo - tol) and np.all(u <= hi + tol)),
            multipliers=np.concatenate([grad[pat < 0], -grad[pat > 0]]),
        )
        if candidate.feasible and bool(np.all(candidate.multipliers >= -tol)):
            u_star = np.clip(u, lo, hi)
            return u_star, float(u_star @ H @ u_star + linear @ u_star)
    # strict convexity guarantees a KKT face; only reachable through rounding
    raise InfeasibleError("No KKT point found for the box QP.")


def _constraint_rows(
    p: CondensedProblem, x_t: np.ndarray, c_t: float
) -> Tuple[np.ndarray, np.ndarray]:
    n = p.n_u
    A = np.vstack([p.Theta, np.eye(n), -np.eye(n)])
    b = np.concatenate([-(p.Xi @ x_t + p.tau + c_t), p.box_hi, -p.box_lo])
    return A, b


def solve_constrained_qp_exact(
    problem: Union[CondensedProblem, TightenedProblem],
    x_t: Optional[np.ndarray] = None,
    cap: int = CONSTRAINED_ROW_CAP,
) -> Tuple[np.ndarray, float]:
    """Exact optimum of the step problem (tightened when given a TightenedProblem).

    Enumerates active subsets of at most n_u rows of [g rows; box rows] in
    increasing size and returns the first KKT point.

    Raises:
        InstanceTooLargeError: If m_c + 2 n_u exceeds ``cap``
        InfeasibleError: If no candidate is feasible
    """
    if isinstance(problem, TightenedProblem):
        p, c_t = problem.base, problem.c_t
        x = problem.x_t if x_t is None else np.asarray(x_t, dtype=float).reshape(-1)
    else:
        if x_t is None:
            raise ValidationError("required for an untightened problem", field="x_t")
        p, c_t = problem, 0.0
        x = np.asarray(x_t, dtype=float).reshape(-1)
    A, b = _constraint_rows(p, x, c_t)
    rows, n = A.shape
    if rows > cap:
        raise InstanceTooLargeError(size=rows, cap=cap)
    Q = 2.0 * p.H
    q = p.G @ x
    tol = _tol(float(np.abs(b).max(initial=0.0)) + float(np.abs(q).max(initial=0.0)))
    m_c = p.m_c

    for size in range(0, n + 1):
        for S in itertools.combinations(range(rows), size):
            box_vars = [(r - m_c) % n for r in S if r >= m_c]
            if len(box_vars) != len(set(box_vars)):
                continue
            A_S = A[list(S)]
            if size and np.linalg.matrix_rank(A_S) < size:
                continue
            kkt = np.block([[Q, A_S.T], [A_S, np.zeros((size, size))]])
            rhs = np.concatenate([-q, b[list(S)]])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            u, lam = sol[:n], sol[n:]
            candidate = KktCandidate(
                active_set=S,
                u=u,
                value=eval_cost(p, u, x),
                feasible=bool(np.all(A @ u <= b + tol)),
                multipliers=lam,
            )
            if candidate.feasible and candidate.multipliers_ok:
                logger.debug("constrained oracle: active set %s", S)
                return u, candidate.value
    raise InfeasibleError()


def lagrangian_value(tightened: TightenedProblem, u: np.ndarray, mu: np.ndarray) -> float:
    """L'(u, mu) = f(u, x_t) + mu' g'(u, x_t)."""
    return eval_cost(tightened.base, u, tightened.x_t) + float(
        np.asarray(mu, dtype=float) @ tightened.eval_constraints(u)
    )


def dual_function_exact(
    tightened: TightenedProblem,
    mu: np.ndarray,
    x_t: Optional[np.ndarray] = None,
    cap: int = BOX_QP_CAP,
) -> float:
    """q'(mu) = min over the box of L'(u, mu).

    Raises:
        ValidationError: If mu has a negative component
        InstanceTooLargeError: If n_u exceeds ``cap``
    """
    p = tightened.base
    x = tightened.x_t if x_t is None else np.asarray(x_t, dtype=float).reshape(-1)
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if np.any(mu < 0.0):
        raise ValidationError("must be componentwise non-negative", field="mu")
    linear = p.G @ x + p.Theta.T @ mu
    _, value = solve_box_qp_exact(p.H, linear, p.box_lo, p.box_hi, cap)
    return value + float(x @ p.W @ x) + float(mu @ (p.Xi @ x + p.tau + tightened.c_t))
