#!/usr/bin/env python3
"""
State elimination

Eliminates the predicted states from the finite-horizon problem and returns
the dense form

    f(u, x) = u' H u + (G x)' u + x' W x
    g(u, x) = Xi x + Theta u + tau <= 0,      u in Omega (a box)

The cost carries no 1/2 factor, so grad_u f = 2 H u + G x.

Input ordering is subsystem-major: all horizon inputs of the first subsystem,
then all of the second, and so on; within a subsystem, time-major. Constraint
rows are ordered as X rows for k = 1..N-1, then Xf rows (k = N), then U rows
for k = 0..N-1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, Tuple

import numpy as np
from scipy.linalg import block_diag

from .error_handler import DimensionMismatchError, HorizonTooSmallError
from .model import NetworkSpec, assemble_aggregate


@dataclass(frozen=True, eq=False)
class CondensedProblem:
    """Dense QP data after state elimination.

    Attributes:
        H: (n_u x n_u) symmetric positive definite quadratic part
        G: (n_u x n_x) cost cross term
        W: (n_x x n_x) state-only cost
        Xi, Theta, tau: affine constraint data
        box_lo, box_hi: stacked input box over the horizon
        blocks: subsystem id -> contiguous range of u
        N: horizon
        input_slices: subsystem id -> range in the aggregate input u_k
        perm: u_subsystem_major = u_time_major[perm]
        row_labels: human-readable label per constraint row
    """

    H: np.ndarray
    G: np.ndarray
    W: np.ndarray
    Xi: np.ndarray
    Theta: np.ndarray
    tau: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray
    blocks: Mapping[int, slice]
    N: int
    input_slices: Mapping[int, slice]
    perm: np.ndarray
    row_labels: Tuple[str, ...]

    @property
    def n_u(self) -> int:
        return int(self.H.shape[0])

    @property
    def n_x(self) -> int:
        return int(self.W.shape[0])

    @property
    def m_c(self) -> int:
        return int(self.Theta.shape[0])

    @property
    def block_ids(self) -> Tuple[int, ...]:
        return tuple(self.blocks)

    @property
    def aggregate_input_dim(self) -> int:
        return self.n_u // self.N

    def block(self, matrix: np.ndarray, i: int, j: int) -> np.ndarray:
        """The (i, j) subsystem block of an (n_u x n_u) matrix."""
        return matrix[self.blocks[i], self.blocks[j]]

    def to_time_major(self, u: np.ndarray) -> np.ndarray:
        """Reshape a subsystem-major u into an (N x m) input sequence."""
        u = np.asarray(u, dtype=float)
        out = np.empty(self.n_u)
        out[self.perm] = u
        return out.reshape(self.N, self.aggregate_input_dim)

    def from_time_major(self, u_seq: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`to_time_major`."""
        flat = np.asarray(u_seq, dtype=float).reshape(-1)
        return flat[self.perm]


def _input_layout(network: NetworkSpec) -> Tuple[Dict[int, slice], Dict[int, slice], np.ndarray]:
    n_m = network.input_dim
    input_slices: Dict[int, slice] = {}
    start = 0
    for s in network.subsystems:
        input_slices[s.index] = slice(start, start + s.m)
        start += s.m
    blocks: Dict[int, slice] = {}
    perm: List[int] = []
    for s in network.subsystems:
        begin = len(perm)
        off = input_slices[s.index].start
        for k in range(network.N):
            perm.extend(k * n_m + off + c for c in range(s.m))
        blocks[s.index] = slice(begin, len(perm))
    return blocks, input_slices, np.asarray(perm, dtype=int)


def condense(network: NetworkSpec) -> CondensedProblem:
    """Eliminate the states over the horizon.

    Raises:
        HorizonTooSmallError: If N < 1
    """
    N = network.N
    if N < 1:
        raise HorizonTooSmallError(field="horizon")
    model = assemble_aggregate(network)
    A, B = model.A, model.B
    n_x, n_m = B.shape

    powers = [np.eye(n_x)]
    for _ in range(N):
        powers.append(A @ powers[-1])

    Sx = np.vstack(powers[1:])
    Su = np.zeros((N * n_x, N * n_m))
    for k in range(1, N + 1):
        for j in range(k):
            Su[(k - 1) * n_x : k * n_x, j * n_m : (j + 1) * n_m] = powers[k - 1 - j] @ B

    Qbar = block_diag(*([model.Q] * (N - 1) + [model.P]))
    Rbar = block_diag(*([model.R] * N))
    H_tm = Su.T @ Qbar @ Su + Rbar
    G_tm = 2.0 * Su.T @ Qbar @ Sx
    W = model.Q + Sx.T @ Qbar @ Sx

    xi_rows: List[np.ndarray] = []
    th_rows: List[np.ndarray] = []
    tau_rows: List[np.ndarray] = []
    labels: List[str] = []

    def state_rows(E: np.ndarray, f: np.ndarray, k: int, name: str) -> None:
        if E.shape[0] == 0:
            return
        rows = slice((k - 1) * n_x, k * n_x)
        xi_rows.append(E @ Sx[rows])
        th_rows.append(E @ Su[rows])
        tau_rows.append(-f)
        labels.extend(f"{name}[k={k},row={r}]" for r in range(E.shape[0]))

    for k in range(1, N):
        state_rows(network.X.E, network.X.f, k, "X")
    state_rows(network.Xf.E, network.Xf.f, N, "Xf")
    if network.U.n_rows:
        for k in range(N):
            sel = np.zeros((network.U.n_rows, N * n_m))
            sel[:, k * n_m : (k + 1) * n_m] = network.U.E
            xi_rows.append(np.zeros((network.U.n_rows, n_x)))
            th_rows.append(sel)
            tau_rows.append(-network.U.f)
            labels.extend(f"U[k={k},row={r}]" for r in range(network.U.n_rows))

    blocks, input_slices, perm = _input_layout(network)
    if xi_rows:
        Xi = np.vstack(xi_rows)
        Theta = np.vstack(th_rows)[:, perm]
        tau = np.concatenate(tau_rows)
    else:
        Xi = np.zeros((0, n_x))
        Theta = np.zeros((0, N * n_m))
        tau = np.zeros(0)

    H = H_tm[np.ix_(perm, perm)]
    H = 0.5 * (H + H.T)
    lo = np.concatenate([np.tile(s.box_lo, N) for s in network.subsystems])
    hi = np.concatenate([np.tile(s.box_hi, N) for s in network.subsystems])

    return CondensedProblem(
        H=H,
        G=G_tm[perm],
        W=W,
        Xi=Xi,
        Theta=Theta,
        tau=tau,
        box_lo=lo,
        box_hi=hi,
        blocks=blocks,
        N=N,
        input_slices=input_slices,
        perm=perm,
        row_labels=tuple(labels),
    )


def _check_dims(p: CondensedProblem, u: np.ndarray, x: np.ndarray) -> None:
    if u.shape != (p.n_u,):
        raise DimensionMismatchError(expected=(p.n_u,), actual=u.shape, field="u")
    if x.shape != (p.n_x,):
        raise DimensionMismatchError(expected=(p.n_x,), actual=x.shape, field="x")


def eval_cost(p: CondensedProblem, u: np.ndarray, x: np.ndarray) -> float:
    """f(u, x) = u'Hu + (Gx)'u + x'Wx."""
    u = np.asarray(u, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    _check_dims(p, u, x)
    return float(u @ p.H @ u + (p.G @ x) @ u + x @ p.W @ x)


def eval_constraints(p: CondensedProblem, u: np.ndarray, x: np.ndarray) -> np.ndarray:
    """g(u, x) = Xi x + Theta u + tau."""
    u = np.asarray(u, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    _check_dims(p, u, x)
    return p.Xi @ x + p.Theta @ u + p.tau


def rollout(network: NetworkSpec, x0: np.ndarray, u_seq: np.ndarray) -> np.ndarray:
    """Simulate x_{k+1} = A x_k + B u_k; returns the (len+1 x n_x) trajectory."""
    model = assemble_aggregate(network)
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape != (network.state_dim,):
        raise DimensionMismatchError(
            expected=(network.state_dim,), actual=x.shape, field="x0"
        )
    seq = np.asarray(u_seq, dtype=float).reshape(-1, network.input_dim)
    traj = [x]
    for u in seq:
        x = model.A @ x + model.B @ u
        traj.append(x)
    return np.vstack(traj)


def rollout_cost(network: NetworkSpec, x0: np.ndarray, u_seq: np.ndarray) -> float:
    """Stage-cost sum over the horizon plus the terminal penalty."""
    model = assemble_aggregate(network)
    traj = rollout(network, x0, u_seq)
    seq = np.asarray(u_seq, dtype=float).reshape(-1, network.input_dim)
    total = 0.0
    for x, u in zip(traj[:-1], seq):
        total += float(x @ model.Q @ x + u @ model.R @ u)
    return total + float(traj[-1] @ model.P @ traj[-1])


def rollout_constraints(
    network: NetworkSpec, x0: np.ndarray, u_seq: np.ndarray
) -> np.ndarray:
    """The constraint rows of :func:`condense` evaluated along a rollout."""
    traj = rollout(network, x0, u_seq)
    seq = np.asarray(u_seq, dtype=float).reshape(-1, network.input_dim)
    N = network.N
    parts = [network.X.E @ traj[k] - network.X.f for k in range(1, N)]
    parts.append(network.Xf.E @ traj[N] - network.Xf.f)
    if network.U.n_rows:
        parts.extend(network.U.E @ seq[k] - network.U.f for k in range(N))
    return np.concatenate(parts) if parts else np.zeros(0)
