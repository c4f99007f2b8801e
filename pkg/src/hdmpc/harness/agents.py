"""
Subsystem agents.

An agent holds only its own block of the condensed problem (row block of H
restricted to its communication set, its Theta columns and its box), the
state term G_i x_t announced by the coordinator, and the latest values
received from its neighbours.
"""

from __future__ import annotations

from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from ..error_handler import ProtocolViolationError
from ..inner_jacobi import LocalBlock
from .messages import COORDINATOR, Message, MessageKind
from .network import SimulatedNetwork


class Agent:
    """Local controller of one subsystem.

    Attributes:
        block: Local problem data
        subscribers: Agents whose communication set contains this one
        u: Current local iterate
        neighbor_values: Latest LocalUpdate payload per neighbour
    """

    def __init__(
        self,
        block: LocalBlock,
        network: SimulatedNetwork,
        subscribers: Sequence[int],
        u_start: np.ndarray,
        neighbor_start: Mapping[int, np.ndarray],
    ):
        self.block = block
        self.network = network
        self.subscribers = tuple(subscribers)
        self.u = np.array(u_start, dtype=float)
        self.neighbor_values: Dict[int, np.ndarray] = {
            j: np.array(neighbor_start[j], dtype=float) for j in block.neighbor_ids
        }
        self.primal_sum = np.zeros(block.size)
        self.state_term: Optional[np.ndarray] = None
        self.base: Optional[np.ndarray] = None
        self.k = 0
        self.p_bar = 0

    @property
    def id(self) -> int:
        return self.block.index

    def handle(self, messages: Sequence[Message]) -> None:
        for m in messages:
            if m.kind == MessageKind.PARAM_ANNOUNCE:
                self.state_term = m.payload[4:]
            elif m.kind == MessageKind.DUAL_BROADCAST:
                if self.state_term is None:
                    raise ProtocolViolationError(
                        f"Agent {self.id} received a dual vector before parameters."
                    )
                self.k = m.k
                self.p_bar = int(m.payload[0])
                self.base = self.block.dual_linear(self.state_term, m.payload[1:])
            elif m.kind == MessageKind.LOCAL_UPDATE:
                self.neighbor_values[m.src] = m.payload
            else:
                raise ProtocolViolationError(
                    f"Agent {self.id} cannot handle {m.kind.label}."
                )

    def neighbor_vector(self) -> np.ndarray:
        if not self.block.neighbor_ids:
            return np.zeros(0)
        return np.concatenate([self.neighbor_values[j] for j in self.block.neighbor_ids])

    def sweep(self) -> np.ndarray:
        """Local minimizer against the neighbours' previous values."""
        if self.base is None:
            raise ProtocolViolationError(f"Agent {self.id} swept without a dual vector.")
        return self.block.solve(self.base, self.neighbor_vector())

    def commit(self, value: np.ndarray, p: int) -> None:
        self.u = value
        for j in self.subscribers:
            self.network.send(MessageKind.LOCAL_UPDATE, self.id, j, value, k=self.k, p=p)

    def contribute(self) -> None:
        self.primal_sum = self.primal_sum + self.u
        self.network.send(
            MessageKind.CONSTRAINT_CONTRIBUTION,
            self.id,
            COORDINATOR,
            self.block.contribution(self.u),
            k=self.k,
        )

    def acknowledge(self, count: int) -> None:
        self.network.send(
            MessageKind.ACK, self.id, COORDINATOR, self.primal_sum / count, k=self.k
        )
