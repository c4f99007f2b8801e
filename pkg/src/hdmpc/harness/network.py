"""
Simulated synchronous network.

Ordered per-channel delivery with sequence numbers, a single-writer message
log, and an audit that agents only ever receive another subsystem's data when
that subsystem is in their communication set.
"""

from __future__ import annotations

import logging
from collections import Counter, deque
from dataclasses import dataclass
from pathlib import Path
from typing import (
    Deque,
    Dict,
    FrozenSet,
    Iterable,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np

from ..error_handler import HdmpcIOError, ProtocolViolationError
from .messages import COORDINATOR, Message, MessageKind, decode_all, encode_message

logger = logging.getLogger(__name__)

# Who may send each kind to whom. "down": coordinator to an agent, "up": agent
# to coordinator, "peer": agent to an agent whose communication set holds it.
_ROUTES: Dict[MessageKind, str] = {
    MessageKind.PARAM_ANNOUNCE: "down",
    MessageKind.DUAL_BROADCAST: "down",
    MessageKind.LOCAL_UPDATE: "peer",
    MessageKind.CONSTRAINT_CONTRIBUTION: "up",
    MessageKind.ACK: "up",
}


@dataclass(frozen=True, eq=False)
class NetworkLog:
    """Everything sent during one distributed step.

    Attributes:
        messages: Messages in send order
        M: Number of agents
        fanout: LocalUpdate messages per sweep
    """

    messages: Tuple[Message, ...] = ()
    M: int = 0
    fanout: int = 0

    def counts(self) -> Dict[str, int]:
        tally = Counter(m.kind for m in self.messages)
        return {kind.label: tally.get(kind, 0) for kind in MessageKind}

    @property
    def nbytes(self) -> int:
        return sum(m.nbytes for m in self.messages)

    def of_kind(self, kind: MessageKind) -> List[Message]:
        return [m for m in self.messages if m.kind == kind]


class SimulatedNetwork:
    """Ordered channels between the coordinator and M agents.

    Attributes:
        communication_sets: agent id -> ids whose LocalUpdates it may receive
        payload_sizes: (kind, src, dst) or (kind, src) -> expected payload length
        log: Every message sent, in order
    """

    def __init__(
        self,
        communication_sets: Mapping[int, Sequence[int]],
        payload_sizes: Optional[Mapping[Tuple[int, ...], int]] = None,
    ):
        self.communication_sets = {i: frozenset(c) for i, c in communication_sets.items()}
        self.payload_sizes: Dict[Tuple[int, ...], int] = dict(payload_sizes or {})
        self.log: List[Message] = []
        self._next_seq: Dict[Tuple[int, int], int] = {}
        self._delivered_seq: Dict[Tuple[int, int], int] = {}
        self._inbox: Dict[int, Deque[Message]] = {
            node: deque() for node in [COORDINATOR, *self.communication_sets]
        }

    @property
    def agent_ids(self) -> Tuple[int, ...]:
        return tuple(self.communication_sets)

    def _audit(self, message: Message) -> None:
        if message.dst not in self._inbox:
            raise ProtocolViolationError(f"Unknown destination {message.dst}.")
        expected = self.payload_sizes.get(
            (message.kind, message.src, message.dst),
            self.payload_sizes.get((message.kind, message.src)),
        )
        if expected is not None and message.payload.size != expected:
            raise ProtocolViolationError(
                f"{message.kind.label} from {message.src}: payload size "
                f"{message.payload.size}, expected {expected}."
            )
        route = _ROUTES[message.kind]
        to_agent = message.dst != COORDINATOR
        from_agent = message.src != COORDINATOR
        if route == "down" and (from_agent or not to_agent):
            raise ProtocolViolationError(
                f"{message.kind.label} must go from the coordinator to an agent."
            )
        if route == "up" and (not from_agent or to_agent):
            raise ProtocolViolationError(
                f"{message.kind.label} must go from an agent to the coordinator."
            )
        if route == "peer":
            if not (from_agent and to_agent):
                raise ProtocolViolationError(f"{message.kind.label} must go between agents.")
            if message.src not in self.communication_sets[message.dst]:
                raise ProtocolViolationError(
                    f"Agent {message.dst} received data of subsystem {message.src} "
                    "outside its communication set."
                )

    def send(
        self,
        kind: MessageKind,
        src: int,
        dst: int,
        payload: np.ndarray,
        k: int = 0,
        p: int = 0,
    ) -> Message:
        """Stamp the next sequence number on the (src, dst) channel and enqueue."""
        channel = (src, dst)
        seq = self._next_seq.get(channel, 0)
        message = Message(
            kind=kind,
            src=src,
            dst=dst,
            seq=seq,
            payload=np.asarray(payload, dtype=float).reshape(-1),
            k=k,
            p=p,
        )
        self._audit(message)
        self._next_seq[channel] = seq + 1
        self.log.append(message)
        self._inbox[dst].append(message)
        return message

    def inject(self, message: Message) -> None:
        """Enqueue a pre-built message without stamping or auditing it."""
        self.log.append(message)
        self._inbox[message.dst].append(message)

    def deliver(self, dst: int) -> List[Message]:
        """Drain ``dst``'s inbox, checking per-channel sequence order.

        Raises:
            ProtocolViolationError: On a repeated or out-of-order sequence number
        """
        inbox = self._inbox[dst]
        out: List[Message] = []
        while inbox:
            message = inbox.popleft()
            last = self._delivered_seq.get(message.channel, -1)
            if message.seq <= last:
                raise ProtocolViolationError(
                    f"Out-of-order seq {message.seq} on channel {message.channel} "
                    f"(last delivered {last})."
                )
            self._audit(message)
            self._delivered_seq[message.channel] = message.seq
            out.append(message)
        return out

    def pending(self) -> int:
        return sum(len(q) for q in self._inbox.values())

    def snapshot(self, fanout: int) -> NetworkLog:
        return NetworkLog(messages=tuple(self.log), M=len(self.communication_sets), fanout=fanout)


def message_subjects(message: Message) -> FrozenSet[int]:
    """Subsystems whose data the payload carries.

    A ParamAnnounce carries G_dst x_t, which belongs to the receiving agent.
    A DualBroadcast carries only coordinator quantities.
    """
    if message.kind == MessageKind.PARAM_ANNOUNCE:
        return frozenset({message.dst})
    if message.kind == MessageKind.DUAL_BROADCAST:
        return frozenset()
    return frozenset({message.src})


def received_subsystems(messages: Iterable[Message]) -> Dict[int, set]:
    """agent id -> subsystems whose data reached it, over every message kind."""
    seen: Dict[int, set] = {}
    for m in messages:
        if m.dst != COORDINATOR:
            seen.setdefault(m.dst, set()).update(message_subjects(m))
    return seen


LOG_MAGIC = b"HDMPCLOG"


def write_message_log(path: Union[str, Path], log: NetworkLog) -> int:
    """Dump the framed messages of a log; returns the number of bytes written.

    Raises:
        HdmpcIOError: If the file cannot be written
    """
    data = LOG_MAGIC + b"".join(encode_message(m) for m in log.messages)
    try:
        Path(path).write_bytes(data)
    except OSError as e:
        raise HdmpcIOError(f"Cannot write message log: {e.strerror}", path=str(path))
    return len(data)


def read_message_log(path: Union[str, Path]) -> List[Message]:
    """
    Raises:
        HdmpcIOError: If the file cannot be read
        ProtocolViolationError: If it is not a message log or a frame is damaged
    """
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise HdmpcIOError(f"Cannot read message log: {e.strerror}", path=str(path))
    if not data.startswith(LOG_MAGIC):
        raise ProtocolViolationError(f"{path} is not a message log.")
    return decode_all(data, len(LOG_MAGIC))
