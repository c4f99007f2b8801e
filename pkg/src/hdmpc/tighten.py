#!/usr/bin/env python3
"""
Constraint tightening

Builds the tightened problem g'(u, x) = g(u, x) + c_t * 1 <= 0 around a
strictly feasible (Slater) vector u_bar, keeps the norm bounds
L_t >= ||g(u, x_t)||_2 and L'_t = L_t + c_t over the input box, and shifts
the Slater vector from one step to the next.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .condense import CondensedProblem, eval_constraints, rollout
from .config_manager import DEFAULT_L0_VERTEX_LIMIT, DEFAULT_TIGHTENING_RATIO
from .error_handler import (
    DimensionMismatchError,
    PredictedTerminalOutsideXfError,
    SlaterViolatedError,
    UnboundedBoxError,
    ValidationError,
)
from .model import NetworkSpec, assemble_aggregate
from .validators import INTERIOR_TOL

logger = logging.getLogger(__name__)

# Vertices evaluated per batch when maximizing ||g|| over the box.
_VERTEX_BATCH = 1 << 14


@dataclass(frozen=True, eq=False)
class SlaterCertificate:
    """A strictly feasible point and its constraint margins -g(u_bar, x)."""

    u_bar: np.ndarray
    margins: np.ndarray
    min_margin: float

    @property
    def is_strict(self) -> bool:
        return self.min_margin > 0.0


@dataclass(frozen=True, eq=False)
class TightenedProblem:
    """Condensed problem plus tightening constant, norm bounds and margin."""

    base: CondensedProblem
    x_t: np.ndarray
    c_t: float
    L_t: float
    Lp_t: float
    gamma_t: float
    slater: SlaterCertificate

    def eval_constraints(self, u: np.ndarray) -> np.ndarray:
        """g'(u, x_t)."""
        return eval_constraints(self.base, u, self.x_t) + self.c_t

    @property
    def constraint_offset(self) -> np.ndarray:
        """Xi x_t + tau + c_t, the u-independent part of g'."""
        return self.base.Xi @ self.x_t + self.base.tau + self.c_t


def slater_certificate(
    p: CondensedProblem, u_bar: np.ndarray, x: np.ndarray
) -> SlaterCertificate:
    """Evaluate the margins of a candidate Slater vector.

    Raises:
        SlaterViolatedError: If u_bar lies outside the input box
    """
    u_bar = np.asarray(u_bar, dtype=float).reshape(-1)
    if u_bar.shape != (p.n_u,):
        raise DimensionMismatchError(expected=(p.n_u,), actual=u_bar.shape, field="u_bar")
    if np.any(u_bar < p.box_lo) or np.any(u_bar > p.box_hi):
        raise SlaterViolatedError("Slater vector lies outside the input box.")
    margins = -eval_constraints(p, u_bar, x)
    min_margin = float(margins.min()) if margins.size else float("inf")
    return SlaterCertificate(u_bar=u_bar, margins=margins, min_margin=min_margin)


def initial_norm_bound(
    p: CondensedProblem, x0: np.ndarray, vertex_limit: int = DEFAULT_L0_VERTEX_LIMIT
) -> float:
    """L_0 >= ||g(u, x0)||_2 for every u in the box.

    ||g|| is convex, so its maximum over the box is attained at a vertex. Up
    to ``vertex_limit`` inputs every vertex is evaluated; beyond that a
    column-wise over-bound is returned.

    Raises:
        UnboundedBoxError: If a box bound is infinite
    """
    if not (np.all(np.isfinite(p.box_lo)) and np.all(np.isfinite(p.box_hi))):
        raise UnboundedBoxError()
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    offset = p.Xi @ x0 + p.tau
    if p.m_c == 0:
        return 0.0
    n = p.n_u
    if n > vertex_limit:
        reach = np.maximum(np.abs(p.box_lo), np.abs(p.box_hi))
        bound = float(np.linalg.norm(offset) + np.linalg.norm(p.Theta, axis=0) @ reach)
        logger.debug("L0 over-bound for n_u=%d: %.6g", n, bound)
        return bound
    width = p.box_hi - p.box_lo
    shifts = np.arange(n, dtype=np.int64)
    best = 0.0
    total = 1 << n
    for start in range(0, total, _VERTEX_BATCH):
        idx = np.arange(start, min(total, start + _VERTEX_BATCH), dtype=np.int64)
        bits = (idx[:, None] >> shifts) & 1
        vertices = p.box_lo + bits * width
        values = vertices @ p.Theta.T + offset
        best = max(best, float(np.sqrt((values * values).sum(axis=1)).max()))
    return best


def update_norm_bound(
    L_prev: float, Xi: np.ndarray, x_t: np.ndarray, x_prev: np.ndarray
) -> float:
    """L_t = L_prev + ||Xi (x_t - x_prev)||_2."""
    diff = np.asarray(x_t, dtype=float) - np.asarray(x_prev, dtype=float)
    if Xi.size == 0:
        return float(L_prev)
    return float(L_prev + np.linalg.norm(Xi @ diff))


def choose_margin(
    slater: SlaterCertificate, ratio: float = DEFAULT_TIGHTENING_RATIO
) -> float:
    """c_t = ratio * min_margin.

    Raises:
        SlaterViolatedError: If min_margin <= 0
    """
    if not 0.0 < ratio < 1.0:
        raise ValidationError("must lie strictly between 0 and 1", field="ratio")
    if not slater.min_margin > 0.0:
        raise SlaterViolatedError(min_margin=slater.min_margin)
    return ratio * slater.min_margin


def build_tightened(
    p: CondensedProblem,
    x_t: np.ndarray,
    slater: SlaterCertificate,
    L_t: float,
    ratio: float = DEFAULT_TIGHTENING_RATIO,
) -> TightenedProblem:
    """Tighten every constraint row by c_t and derive L'_t and gamma_t.

    Raises:
        SlaterViolatedError: If the Slater vector is not strictly feasible
    """
    c_t = choose_margin(slater, ratio)
    gamma_t = slater.min_margin - c_t
    if not gamma_t > 0.0:
        raise SlaterViolatedError(min_margin=gamma_t)
    tightened = TightenedProblem(
        base=p,
        x_t=np.asarray(x_t, dtype=float).reshape(-1),
        c_t=c_t,
        L_t=float(L_t),
        Lp_t=float(L_t) + c_t,
        gamma_t=gamma_t,
        slater=slater,
    )
    logger.debug(
        "tightened: c=%.6g gamma=%.6g L=%.6g L'=%.6g",
        c_t,
        gamma_t,
        tightened.L_t,
        tightened.Lp_t,
    )
    return tightened


def shift_slater(
    network: NetworkSpec, p: CondensedProblem, u_t: np.ndarray, x_t: np.ndarray
) -> np.ndarray:
    """Drop each subsystem's first input and append K_i x^i_{t+N}.

    Args:
        network: The network (for K and Xf)
        p: Condensed problem of the step that produced u_t
        u_t: Strictly feasible solution at step t (subsystem-major)
        x_t: State at step t

    Returns:
        Slater vector for step t+1 (subsystem-major)

    Raises:
        PredictedTerminalOutsideXfError: If x_{t+N} is not strictly inside Xf
    """
    u_t = np.asarray(u_t, dtype=float).reshape(-1)
    seq = p.to_time_major(u_t)
    terminal = rollout(network, x_t, seq)[-1]
    slack = network.Xf.slack(terminal)
    if slack.size and float(slack.min()) <= INTERIOR_TOL:
        raise PredictedTerminalOutsideXfError(slack=float(slack.min()))
    model = assemble_aggregate(network)
    appended = model.K @ terminal
    shifted = np.vstack([seq[1:], appended[None, :]])
    return p.from_time_major(shifted)
