#!/usr/bin/env python3
"""
Jacobi inner loop

Minimizes the Lagrangian L'(u, mu) = u'Hu + (Gx + Theta' mu)'u + const over
the input box by synchronous block updates: in every sweep each subsystem
solves its own box QP exactly against the other blocks' previous values.

The number of sweeps is fixed a priori from a contraction certificate on H,
which only depends on the quadratic part and is therefore valid for every
dual vector.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import Executor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .condense import CondensedProblem
from .config_manager import DEFAULT_FACE_ENUMERATION_CAP
from .error_handler import (
    LocalSolveFailedError,
    ValidationError,
    WeakCouplingViolatedError,
)

logger = logging.getLogger(__name__)

SweepCallback = Callable[[int, np.ndarray], None]


# =============================================================================
# Contraction certificate
# =============================================================================


@dataclass(frozen=True)
class ContractionCertificate:
    """Per-block spectral data of H and the derived Jacobi constants.

    Attributes:
        block_ids: Subsystem ids in block order
        lambda_min, lambda_max: Extreme eigenvalues of each H_ii
        offdiag_sigma_sum: sum over j != i of the spectral norm of H_ij
        gamma: Step coefficient of the equivalent gradient mapping
        phi: Contraction modulus in the block-maximum norm
        passed: lambda_min > offdiag_sigma_sum for every block
        worst_block: Block with the smallest lambda_min - offdiag_sigma_sum
    """

    block_ids: Tuple[int, ...]
    lambda_min: Tuple[float, ...]
    lambda_max: Tuple[float, ...]
    offdiag_sigma_sum: Tuple[float, ...]
    gamma: float
    phi: float
    passed: bool
    worst_block: Optional[int] = None

    @property
    def M(self) -> int:
        return len(self.block_ids)

    def failure(self) -> WeakCouplingViolatedError:
        """The error describing the worst block of a failed certificate."""
        pos = self.block_ids.index(self.worst_block) if self.worst_block in self.block_ids else 0
        return WeakCouplingViolatedError(
            block=self.block_ids[pos],
            lambda_min=self.lambda_min[pos],
            coupling=self.offdiag_sigma_sum[pos],
        )


def contraction_modulus(
    lambda_min: Sequence[float],
    lambda_max: Sequence[float],
    sigma_sum: Sequence[float],
    gamma: float,
) -> float:
    """max_i max{2g(lmax_i + s_i) - 1, 1 - 2g(lmin_i - s_i)}, floored at 0."""
    phi = 0.0
    for lmin, lmax, s in zip(lambda_min, lambda_max, sigma_sum):
        phi = max(phi, 2.0 * gamma * (lmax + s) - 1.0, 1.0 - 2.0 * gamma * (lmin - s))
    return phi


def certify_blocks(
    H: np.ndarray,
    blocks: Mapping[int, slice],
    strict: bool = True,
    gamma: Optional[float] = None,
) -> ContractionCertificate:
    """Check the weak coupling condition on a block partition of H.

    Args:
        H: Symmetric positive definite matrix
        blocks: Block id -> index range
        strict: Raise instead of returning a failed certificate
        gamma: Explicit step coefficient; defaults to the midpoint
            0.5 / max_i(lambda_max_i + sigma_i)

    Raises:
        WeakCouplingViolatedError: If strict and some block fails
    """
    ids = tuple(blocks)
    lmins: List[float] = []
    lmaxs: List[float] = []
    sums: List[float] = []
    for i in ids:
        eig = np.linalg.eigvalsh(H[blocks[i], blocks[i]])
        lmins.append(float(eig[0]))
        lmaxs.append(float(eig[-1]))
        sums.append(
            sum(
                float(np.linalg.norm(H[blocks[i], blocks[j]], 2))
                for j in ids
                if j != i
            )
        )
    gaps = [lmin - s for lmin, s in zip(lmins, sums)]
    worst_pos = int(np.argmin(gaps))
    passed = all(g > 0.0 for g in gaps)
    if not passed and strict:
        raise WeakCouplingViolatedError(
            block=ids[worst_pos],
            lambda_min=lmins[worst_pos],
            coupling=sums[worst_pos],
        )
    upper = max(lmax + s for lmax, s in zip(lmaxs, sums))
    if gamma is None:
        gamma = 0.5 / upper
    elif not 0.0 < gamma < 1.0 / upper:
        raise ValidationError(f"must lie in (0, {1.0 / upper:.6g})", field="gamma")
    phi = contraction_modulus(lmins, lmaxs, sums, gamma) if passed else math.nan
    return ContractionCertificate(
        block_ids=ids,
        lambda_min=tuple(lmins),
        lambda_max=tuple(lmaxs),
        offdiag_sigma_sum=tuple(sums),
        gamma=gamma,
        phi=phi,
        passed=passed,
        worst_block=ids[worst_pos],
    )


def certify_contraction(
    p: CondensedProblem, strict: bool = True
) -> ContractionCertificate:
    """Certificate for the subsystem blocks of a condensed problem."""
    cert = certify_blocks(p.H, p.blocks, strict=strict)
    logger.debug("contraction: gamma=%.6g phi=%.6g pass=%s", cert.gamma, cert.phi, cert.passed)
    return cert


# =============================================================================
# Exact box QP
# =============================================================================


@lru_cache(maxsize=None)
def _face_patterns(n: int) -> Tuple[Tuple[int, ...], ...]:
    patterns = itertools.product((0, -1, 1), repeat=n)
    return tuple(sorted(patterns, key=lambda pat: sum(1 for s in pat if s)))


def _kkt_tol(H: np.ndarray, linear: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> float:
    reach = float(np.max(np.maximum(np.abs(lo), np.abs(hi))))
    scale = 1.0 + float(np.max(np.abs(H))) * reach + float(np.max(np.abs(linear)))
    return 1e-12 * scale


def _enumerate_faces(
    H: np.ndarray, linear: np.ndarray, lo: np.ndarray, hi: np.ndarray
) -> Optional[np.ndarray]:
    n = len(linear)
    Q = 2.0 * H
    tol = _kkt_tol(H, linear, lo, hi)
    for pattern in _face_patterns(n):
        pat = np.asarray(pattern)
        free = pat == 0
        u = np.where(pat < 0, lo, np.where(pat > 0, hi, 0.0))
        if free.any():
            rhs = -(linear[free] + Q[np.ix_(free, ~free)] @ u[~free])
            u[free] = np.linalg.solve(Q[np.ix_(free, free)], rhs)
            if np.any(u[free] < lo[free] - tol) or np.any(u[free] > hi[free] + tol):
                continue
        grad = Q @ u + linear
        if np.any(grad[pat < 0] < -tol) or np.any(grad[pat > 0] > tol):
            continue
        return np.clip(u, lo, hi)
    return None


def _active_set(
    H: np.ndarray,
    linear: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    start: Optional[np.ndarray] = None,
) -> np.ndarray:
    n = len(linear)
    Q = 2.0 * H
    tol = _kkt_tol(H, linear, lo, hi)
    x = np.clip(np.zeros(n) if start is None else start, lo, hi)
    at_lo = x <= lo
    at_hi = (x >= hi) & ~at_lo
    max_iter = 50 * n + 50
    for _ in range(max_iter):
        free = ~(at_lo | at_hi)
        target = x.copy()
        if free.any():
            rhs = -(linear[free] + Q[np.ix_(free, ~free)] @ x[~free])
            target[free] = np.linalg.solve(Q[np.ix_(free, free)], rhs)
        step = target - x
        if np.linalg.norm(step) <= tol:
            grad = Q @ x + linear
            mult = np.where(at_lo, grad, np.where(at_hi, -grad, np.inf))
            j = int(np.argmin(mult))
            if mult[j] >= -tol:
                return x
            at_lo[j] = False
            at_hi[j] = False
            continue
        alpha = 1.0
        blocking = -1
        for j in np.flatnonzero(free):
            if step[j] < 0.0:
                ratio = (lo[j] - x[j]) / step[j]
            elif step[j] > 0.0:
                ratio = (hi[j] - x[j]) / step[j]
            else:
                continue
            if ratio < alpha:
                alpha, blocking = ratio, int(j)
        x = x + alpha * step
        if blocking >= 0:
            if step[blocking] < 0.0:
                x[blocking] = lo[blocking]
                at_lo[blocking] = True
            else:
                x[blocking] = hi[blocking]
                at_hi[blocking] = True
        else:
            x = target
    raise LocalSolveFailedError(iterations=max_iter)


def box_qp_argmin(
    H: np.ndarray,
    linear: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    face_cap: int = DEFAULT_FACE_ENUMERATION_CAP,
) -> np.ndarray:
    """Exact minimizer of u'Hu + linear'u over lo <= u <= hi (H > 0).

    Small problems enumerate box faces; larger ones use a primal active-set
    method. Both terminate with the exact KKT point.

    Raises:
        LocalSolveFailedError: If the active-set method does not terminate
    """
    linear = np.asarray(linear, dtype=float)
    if len(linear) <= face_cap:
        u = _enumerate_faces(H, linear, lo, hi)
        if u is not None:
            return u
    return _active_set(H, linear, lo, hi)


# =============================================================================
# Block partition
# =============================================================================


@dataclass(frozen=True, eq=False)
class LocalBlock:
    """Everything subsystem i needs for its local solve.

    H_in holds the H_ij blocks for the communication set C^i = {j != i :
    H_ij != 0}, stacked column-wise in subsystem order.
    """

    index: int
    sl: slice
    H_ii: np.ndarray
    neighbor_ids: Tuple[int, ...]
    neighbor_slices: Tuple[slice, ...]
    H_in: np.ndarray
    G_i: np.ndarray
    Theta_i: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    face_cap: int = DEFAULT_FACE_ENUMERATION_CAP

    @property
    def size(self) -> int:
        return int(self.H_ii.shape[0])

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def state_term(self, x_t: np.ndarray) -> np.ndarray:
        """G_i x_t, the only part of the state block i needs."""
        return self.G_i @ x_t

    def dual_linear(self, state_term: np.ndarray, mu: np.ndarray) -> np.ndarray:
        return state_term + self.Theta_i.T @ mu

    def base_linear(self, x_t: np.ndarray, mu: np.ndarray) -> np.ndarray:
        """(G x + Theta' mu) restricted to block i."""
        return self.dual_linear(self.state_term(x_t), mu)

    def contribution(self, u_i: np.ndarray) -> np.ndarray:
        """Theta_i u_i, this block's share of the constraint value."""
        return self.Theta_i @ u_i

    def solve(self, base_linear: np.ndarray, neighbor_values: np.ndarray) -> np.ndarray:
        """Exact block minimizer given the neighbours' stacked values."""
        linear = base_linear
        if self.neighbor_ids:
            linear = base_linear + 2.0 * (self.H_in @ neighbor_values)
        return box_qp_argmin(self.H_ii, linear, self.lo, self.hi, self.face_cap)

    def gather(self, u: np.ndarray) -> np.ndarray:
        if not self.neighbor_slices:
            return np.zeros(0)
        return np.concatenate([u[s] for s in self.neighbor_slices])


@dataclass(frozen=True, eq=False)
class BlockPartition:
    """The condensed problem split into per-subsystem local blocks."""

    problem: CondensedProblem
    blocks: Tuple[LocalBlock, ...]
    hess_norm: float
    radius: float
    diameters: Tuple[float, ...] = field(default=())

    @property
    def M(self) -> int:
        return len(self.blocks)

    def communication_sets(self) -> Mapping[int, Tuple[int, ...]]:
        return {b.index: b.neighbor_ids for b in self.blocks}

    def fanout(self) -> int:
        """LocalUpdate messages per sweep: sum_i |{j : i in C^j}|."""
        return sum(len(b.neighbor_ids) for b in self.blocks)

    def lipschitz(self, x_t: np.ndarray, mu: np.ndarray) -> float:
        p = self.problem
        return self.hess_norm * self.radius + float(
            np.linalg.norm(p.G @ x_t + p.Theta.T @ mu)
        )

    def initial_point(self) -> np.ndarray:
        p = self.problem
        return np.clip(np.zeros(p.n_u), p.box_lo, p.box_hi)


def partition_problem(
    p: CondensedProblem, face_cap: int = DEFAULT_FACE_ENUMERATION_CAP
) -> BlockPartition:
    ids = p.block_ids
    blocks: List[LocalBlock] = []
    for i in ids:
        sl = p.blocks[i]
        nbrs = tuple(j for j in ids if j != i and np.any(p.block(p.H, i, j) != 0.0))
        if nbrs:
            H_in = np.hstack([p.block(p.H, i, j) for j in nbrs])
        else:
            H_in = np.zeros((sl.stop - sl.start, 0))
        blocks.append(
            LocalBlock(
                index=i,
                sl=sl,
                H_ii=p.block(p.H, i, i),
                neighbor_ids=nbrs,
                neighbor_slices=tuple(p.blocks[j] for j in nbrs),
                H_in=H_in,
                G_i=p.G[sl],
                Theta_i=p.Theta[:, sl],
                lo=p.box_lo[sl],
                hi=p.box_hi[sl],
                face_cap=face_cap,
            )
        )
    return BlockPartition(
        problem=p,
        blocks=tuple(blocks),
        hess_norm=float(np.linalg.norm(2.0 * p.H, 2)),
        radius=float(np.linalg.norm(np.maximum(np.abs(p.box_lo), np.abs(p.box_hi)))),
        diameters=tuple(b.diameter for b in blocks),
    )


# =============================================================================
# Operations
# =============================================================================


def lipschitz_bound(p: CondensedProblem, mu: np.ndarray, x_t: np.ndarray) -> float:
    """||2H||_2 * rho + ||G x + Theta' mu||_2, a Lipschitz constant of L' on the box."""
    rho = float(np.linalg.norm(np.maximum(np.abs(p.box_lo), np.abs(p.box_hi))))
    return float(np.linalg.norm(2.0 * p.H, 2)) * rho + float(
        np.linalg.norm(p.G @ np.asarray(x_t, dtype=float) + p.Theta.T @ np.asarray(mu, dtype=float))
    )


def block_diameters(p: CondensedProblem) -> Tuple[float, ...]:
    return tuple(
        float(np.linalg.norm(p.box_hi[s] - p.box_lo[s])) for s in p.blocks.values()
    )


def inner_iterations_needed(
    cert: ContractionCertificate,
    Lambda_k: float,
    eps_t: float,
    diameters: Sequence[float],
    M: int,
) -> int:
    """Smallest p with Lambda * M * phi^p * max D <= eps, at least 1."""
    if eps_t <= 0.0:
        raise ValidationError("must be positive", field="eps_t")
    scale = Lambda_k * M * max(diameters)
    if scale <= 0.0 or cert.phi <= 0.0:
        return 1
    ratio = eps_t / scale
    if ratio >= 1.0:
        return 1
    return max(1, math.ceil(math.log(ratio) / math.log(cert.phi)))


def local_argmin(
    p: CondensedProblem,
    mu: np.ndarray,
    u: np.ndarray,
    i: int,
    x_t: np.ndarray,
    partition: Optional[BlockPartition] = None,
) -> np.ndarray:
    """Exact minimizer of L'(., mu) over block i with the other blocks of u fixed."""
    partition = partition or partition_problem(p)
    blk = next(b for b in partition.blocks if b.index == i)
    return blk.solve(blk.base_linear(x_t, mu), blk.gather(u))


def jacobi_sweep(
    partition: BlockPartition,
    base_linears: Sequence[np.ndarray],
    u: np.ndarray,
    executor: Optional[Executor] = None,
) -> np.ndarray:
    """One synchronous sweep: every block reads u and writes the next iterate."""

    def work(pos: int) -> np.ndarray:
        blk = partition.blocks[pos]
        return blk.solve(base_linears[pos], blk.gather(u))

    positions = range(partition.M)
    if executor is None:
        results = [work(pos) for pos in positions]
    else:
        results = list(executor.map(work, positions))
    nxt = u.copy()
    for blk, value in zip(partition.blocks, results):
        nxt[blk.sl] = value
    return nxt


@dataclass(eq=False)
class JacobiState:
    """Current inner iterate; mu stays fixed for the whole inner loop."""

    u: np.ndarray
    mu: np.ndarray
    p: int = 0

    def block(self, partition: BlockPartition, i: int) -> np.ndarray:
        return self.u[partition.problem.blocks[i]]

    def advance(
        self,
        partition: BlockPartition,
        base_linears: Sequence[np.ndarray],
        executor: Optional[Executor] = None,
    ) -> None:
        self.u = jacobi_sweep(partition, base_linears, self.u, executor)
        self.p += 1


@dataclass(frozen=True, eq=False)
class InnerSolve:
    """Result of one Lagrangian minimization."""

    u: np.ndarray
    sweeps: int
    lipschitz: float


def solve_lagrangian(
    partition: BlockPartition,
    x_t: np.ndarray,
    mu: np.ndarray,
    eps_t: float,
    cert: ContractionCertificate,
    warm_start: Optional[np.ndarray] = None,
    executor: Optional[Executor] = None,
    sweep_callback: Optional[SweepCallback] = None,
) -> InnerSolve:
    """Run the a-priori number of Jacobi sweeps on L'(., mu).

    The returned point is eps_t-optimal for min over the box of L'(., mu).

    Raises:
        WeakCouplingViolatedError: If the certificate did not pass
    """
    if not cert.passed:
        raise cert.failure()
    Lambda = partition.lipschitz(x_t, mu)
    sweeps = inner_iterations_needed(cert, Lambda, eps_t, partition.diameters, partition.M)
    start = partition.initial_point() if warm_start is None else np.array(warm_start, dtype=float)
    state = JacobiState(u=start, mu=np.asarray(mu, dtype=float))
    base = [blk.base_linear(x_t, state.mu) for blk in partition.blocks]
    if sweep_callback is not None:
        sweep_callback(0, state.u)
    while state.p < sweeps:
        state.advance(partition, base, executor)
        if sweep_callback is not None:
            sweep_callback(state.p, state.u)
    return InnerSolve(u=state.u, sweeps=sweeps, lipschitz=Lambda)
