"""
Harness messages and their binary framing.

Each frame is little-endian:

    u32  frame length (bytes after this field)
    u8   kind
    i32  src
    i32  dst
    u64  seq
    i32  outer iteration k
    i32  sweep p
    u32  payload length n
    n x f64 payload
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterator, List, Tuple

import numpy as np

from ..error_handler import ProtocolViolationError

COORDINATOR = -1

_LENGTH = struct.Struct("<I")
_HEADER = struct.Struct("<BiiQiiI")
_FLOAT = np.dtype("<f8")


class MessageKind(IntEnum):
    PARAM_ANNOUNCE = 1
    DUAL_BROADCAST = 2
    LOCAL_UPDATE = 3
    CONSTRAINT_CONTRIBUTION = 4
    ACK = 5

    @property
    def label(self) -> str:
        return "".join(part.capitalize() for part in self.name.split("_"))


@dataclass(frozen=True, eq=False)
class Message:
    """One message on a simulated channel.

    Payload layouts:
        PARAM_ANNOUNCE: alpha, eps, k_bar, phi, then G_dst x_t
        DUAL_BROADCAST: p_bar_k, then mu
        LOCAL_UPDATE: u^src after sweep p
        CONSTRAINT_CONTRIBUTION: Theta_src u^src
        ACK: averaged block of src
    """

    kind: MessageKind
    src: int
    dst: int
    seq: int
    payload: np.ndarray
    k: int = 0
    p: int = 0

    @property
    def channel(self) -> Tuple[int, int]:
        return (self.src, self.dst)

    @property
    def nbytes(self) -> int:
        return _LENGTH.size + _HEADER.size + self.payload.size * _FLOAT.itemsize


def encode_message(message: Message) -> bytes:
    body = np.ascontiguousarray(message.payload, dtype=_FLOAT).tobytes()
    header = _HEADER.pack(
        int(message.kind),
        message.src,
        message.dst,
        message.seq,
        message.k,
        message.p,
        message.payload.size,
    )
    return _LENGTH.pack(len(header) + len(body)) + header + body


def decode_message(buffer: bytes, offset: int = 0) -> Tuple[Message, int]:
    """Decode the frame starting at ``offset``; returns the message and the next offset.

    Raises:
        ProtocolViolationError: On a truncated or inconsistent frame
    """
    if offset + _LENGTH.size > len(buffer):
        raise ProtocolViolationError("Truncated frame length.")
    (length,) = _LENGTH.unpack_from(buffer, offset)
    start = offset + _LENGTH.size
    end = start + length
    if end > len(buffer) or length < _HEADER.size:
        raise ProtocolViolationError(f"Truncated frame at offset {offset}.")
    kind, src, dst, seq, k, p, n = _HEADER.unpack_from(buffer, start)
    if _HEADER.size + n * _FLOAT.itemsize != length:
        raise ProtocolViolationError(
            f"Payload length {n} disagrees with frame length {length}."
        )
    try:
        msg_kind = MessageKind(kind)
    except ValueError:
        raise ProtocolViolationError(f"Unknown message kind {kind}.")
    payload = np.frombuffer(buffer, dtype=_FLOAT, count=n, offset=start + _HEADER.size)
    message = Message(
        kind=msg_kind,
        src=src,
        dst=dst,
        seq=seq,
        payload=payload.astype(float),
        k=k,
        p=p,
    )
    return message, end


def iter_frames(buffer: bytes, offset: int = 0) -> Iterator[Message]:
    while offset < len(buffer):
        message, offset = decode_message(buffer, offset)
        yield message


def decode_all(buffer: bytes, offset: int = 0) -> List[Message]:
    return list(iter_frames(buffer, offset))
