"""
Coordinator and the distributed step driver.

The coordinator owns the dual vector. Per outer iteration it broadcasts mu
and the sweep count, lets the agents run their synchronous Jacobi rounds,
sums the agents' constraint contributions and takes the projected dual step.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from concurrent.futures import Executor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config_manager import SolverOptions
from ..error_handler import ProtocolViolationError
from ..inner_jacobi import (
    BlockPartition,
    ContractionCertificate,
    inner_iterations_needed,
    partition_problem,
)
from ..outer_subgrad import OuterParams, StepSolution, dual_update, finish_step
from ..tighten import TightenedProblem
from .agents import Agent
from .messages import COORDINATOR, Message, MessageKind
from .network import NetworkLog, SimulatedNetwork

logger = logging.getLogger(__name__)


class Coordinator:
    """Upper-level controller driving one distributed MPC step."""

    def __init__(
        self,
        partition: BlockPartition,
        tightened: TightenedProblem,
        params: OuterParams,
        cert: ContractionCertificate,
        options: Optional[SolverOptions] = None,
        executor: Optional[Executor] = None,
    ):
        self.partition = partition
        self.tightened = tightened
        self.params = params
        self.cert = cert
        self.options = options or SolverOptions()
        self.executor = executor
        p = partition.problem
        sizes: Dict[Tuple[int, ...], int] = {
            (MessageKind.DUAL_BROADCAST, COORDINATOR): 1 + p.m_c,
        }
        for blk in partition.blocks:
            sizes[(MessageKind.PARAM_ANNOUNCE, COORDINATOR, blk.index)] = 4 + blk.size
            sizes[(MessageKind.LOCAL_UPDATE, blk.index)] = blk.size
            sizes[(MessageKind.CONSTRAINT_CONTRIBUTION, blk.index)] = p.m_c
            sizes[(MessageKind.ACK, blk.index)] = blk.size
        self.network = SimulatedNetwork(partition.communication_sets(), sizes)
        start = partition.initial_point()
        self.agents: List[Agent] = []
        for blk in partition.blocks:
            subscribers = [
                other.index for other in partition.blocks if blk.index in other.neighbor_ids
            ]
            self.agents.append(
                Agent(
                    blk,
                    self.network,
                    subscribers,
                    u_start=start[blk.sl],
                    neighbor_start={
                        j: start[s] for j, s in zip(blk.neighbor_ids, blk.neighbor_slices)
                    },
                )
            )

    def _broadcast(self, kind: MessageKind, payload: np.ndarray, k: int = 0) -> None:
        for agent in self.agents:
            self.network.send(kind, COORDINATOR, agent.id, payload, k=k)

    def _dispatch(self) -> None:
        for agent in self.agents:
            agent.handle(self.network.deliver(agent.id))

    def _collect(self, kind: MessageKind, k: int) -> Dict[int, np.ndarray]:
        received: Dict[int, np.ndarray] = {}
        for m in self.network.deliver(COORDINATOR):
            if m.kind != kind or m.k != k or m.src in received:
                raise ProtocolViolationError(
                    f"Unexpected {m.kind.label} from {m.src} at k={m.k}."
                )
            received[m.src] = m.payload
        if len(received) != len(self.agents):
            raise ProtocolViolationError(
                f"Expected {len(self.agents)} {kind.label} messages, got {len(received)}."
            )
        return received

    def run(self) -> StepSolution:
        """Execute k_bar outer iterations and assemble the averaged input.

        Raises:
            WeakCouplingViolatedError: If the contraction certificate did not pass
            ProtocolViolationError: On any message ordering or locality fault
        """
        if not self.cert.passed:
            raise self.cert.failure()
        params = self.params
        p = self.partition.problem
        x_t = self.tightened.x_t
        offset = self.tightened.constraint_offset
        head = np.array([params.alpha_t, params.eps_t, float(params.k_bar), self.cert.phi])
        for agent in self.agents:
            self.network.send(
                MessageKind.PARAM_ANNOUNCE,
                COORDINATOR,
                agent.id,
                np.concatenate([head, agent.block.state_term(x_t)]),
            )
        self._dispatch()

        mu = np.zeros(p.m_c)
        constraint_sum = np.zeros(p.m_c)
        k_used = 0
        total_sweeps = 0
        for k in range(params.k_bar):
            Lambda = self.partition.lipschitz(x_t, mu)
            p_bar = inner_iterations_needed(
                self.cert, Lambda, params.eps_t, self.partition.diameters, self.partition.M
            )
            self._broadcast(
                MessageKind.DUAL_BROADCAST, np.concatenate([[float(p_bar)], mu]), k=k
            )
            self._dispatch()
            for sweep in range(1, p_bar + 1):
                if self.executor is None:
                    values = [agent.sweep() for agent in self.agents]
                else:
                    values = list(self.executor.map(lambda a: a.sweep(), self.agents))
                for agent, value in zip(self.agents, values):
                    agent.commit(value, sweep)
                self._dispatch()
            for agent in self.agents:
                agent.contribute()
            contributions = self._collect(MessageKind.CONSTRAINT_CONTRIBUTION, k)
            d = offset.copy()
            for blk in self.partition.blocks:
                d = d + contributions[blk.index]
            constraint_sum = constraint_sum + d
            k_used += 1
            total_sweeps += p_bar
            mu = dual_update(mu, params.alpha_t, d)
            if self.options.early_exit and np.all(constraint_sum / k_used <= 0.0):
                logger.warning("early exit after %d of %d outer iterations", k_used, params.k_bar)
                break

        for agent in self.agents:
            agent.acknowledge(k_used)
        acks = self._collect(MessageKind.ACK, k_used - 1)
        u_hat = np.empty(p.n_u)
        for blk in self.partition.blocks:
            u_hat[blk.sl] = acks[blk.index]
        return finish_step(self.tightened, u_hat, k_used, total_sweeps, mu)

    def log(self) -> NetworkLog:
        return self.network.snapshot(self.partition.fanout())


def run_distributed_step(
    tightened: TightenedProblem,
    params: OuterParams,
    cert: ContractionCertificate,
    options: Optional[SolverOptions] = None,
    partition: Optional[BlockPartition] = None,
    executor: Optional[Executor] = None,
) -> Tuple[StepSolution, NetworkLog]:
    """One MPC step through the coordinator/agent protocol."""
    opts = options or SolverOptions()
    partition = partition or partition_problem(tightened.base, opts.face_enumeration_cap)
    coordinator = Coordinator(partition, tightened, params, cert, opts, executor)
    solution = coordinator.run()
    log = coordinator.log()
    logger.debug("distributed step: %d messages, %d bytes", len(log.messages), log.nbytes)
    return solution, log


# =============================================================================
# Accounting
# =============================================================================


@dataclass(frozen=True)
class MessageStats:
    """Per-kind totals of a distributed step."""

    counts: Dict[str, int]
    total: int
    nbytes: int
    outer_iterations: int
    sweeps: int

    def to_dict(self) -> dict:
        return {
            "counts": dict(self.counts),
            "total": self.total,
            "bytes": self.nbytes,
            "outer_iterations": self.outer_iterations,
            "sweeps": self.sweeps,
        }


def _per_iteration(messages: Sequence[Message], kind: MessageKind) -> Dict[int, int]:
    tally: Dict[int, int] = defaultdict(int)
    for m in messages:
        if m.kind == kind:
            tally[m.k] += 1
    return tally


def message_stats(log: NetworkLog) -> MessageStats:
    """Totals per kind, after checking the counting invariants exactly.

    Per outer iteration k: M DualBroadcast, M ConstraintContribution and
    p_bar_k * fanout LocalUpdate messages; per step: M ParamAnnounce, M Ack.

    Raises:
        ProtocolViolationError: If any count disagrees
    """
    counts = log.counts()
    if not log.messages:
        return MessageStats(counts=counts, total=0, nbytes=0, outer_iterations=0, sweeps=0)
    M = log.M
    p_bars = {m.k: int(m.payload[0]) for m in log.of_kind(MessageKind.DUAL_BROADCAST)}
    duals = _per_iteration(log.messages, MessageKind.DUAL_BROADCAST)
    contribs = _per_iteration(log.messages, MessageKind.CONSTRAINT_CONTRIBUTION)
    updates = _per_iteration(log.messages, MessageKind.LOCAL_UPDATE)
    for k, p_bar in p_bars.items():
        expected = {
            MessageKind.DUAL_BROADCAST.label: (duals[k], M),
            MessageKind.CONSTRAINT_CONTRIBUTION.label: (contribs[k], M),
            MessageKind.LOCAL_UPDATE.label: (updates[k], p_bar * log.fanout),
        }
        for label, (got, want) in expected.items():
            if got != want:
                raise ProtocolViolationError(
                    f"{label} count {got} at k={k}, expected {want}."
                )
    stray = set(contribs) | set(updates)
    if not stray <= set(p_bars):
        raise ProtocolViolationError("Messages reference an outer iteration with no dual broadcast.")
    for label in (MessageKind.PARAM_ANNOUNCE.label, MessageKind.ACK.label):
        if counts[label] != M:
            raise ProtocolViolationError(f"{label} count {counts[label]}, expected {M}.")
    return MessageStats(
        counts=counts,
        total=len(log.messages),
        nbytes=log.nbytes,
        outer_iterations=len(p_bars),
        sweeps=sum(p_bars.values()),
    )
