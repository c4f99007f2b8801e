"""
Coordinator/agent harness.

Runs one MPC step as explicit message passing over a simulated synchronous
network and records every message.
"""

from .agents import Agent
from .coordinator import Coordinator, MessageStats, message_stats, run_distributed_step
from .messages import COORDINATOR, Message, MessageKind, decode_message, encode_message
from .network import (
    NetworkLog,
    SimulatedNetwork,
    message_subjects,
    read_message_log,
    received_subsystems,
    write_message_log,
)

__all__ = [
    "Agent",
    "COORDINATOR",
    "Coordinator",
    "Message",
    "MessageKind",
    "MessageStats",
    "NetworkLog",
    "SimulatedNetwork",
    "decode_message",
    "encode_message",
    "message_stats",
    "message_subjects",
    "read_message_log",
    "received_subsystems",
    "run_distributed_step",
    "write_message_log",
]
