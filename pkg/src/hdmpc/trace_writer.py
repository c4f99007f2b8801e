#!/usr/bin/env python3
"""
Closed-loop trace files

JSON Lines: one header object, then one "step" object per MPC step and,
optionally, "outer" objects for the outer iterations of each step. Floats
are written with repr, the shortest decimal that round-trips a 64-bit float.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any, Dict, List, Mapping, Optional, Union

from .error_handler import HdmpcIOError, ParseError
from .mpc_loop import TraceRecord

logger = logging.getLogger(__name__)

TRACE_SCHEMA_VERSION = 1


class TraceWriter:
    """Append-only trace sink usable as ``simulate(..., sink=writer)``.

    Example:
        with TraceWriter(path, instance_hash=h, parameters=opts.to_dict()) as w:
            simulate(network, x0, u_bar0, steps, sink=w)
    """

    def __init__(
        self,
        path: Union[str, Path],
        instance_hash: str,
        parameters: Optional[Mapping[str, Any]] = None,
        outer_records: bool = False,
    ):
        self.path = Path(path)
        self.header = {
            "type": "header",
            "schema_version": TRACE_SCHEMA_VERSION,
            "instance_hash": instance_hash,
            "parameters": dict(parameters or {}),
        }
        self.outer_records = outer_records
        self.steps_written = 0
        self._fh: Optional[IO[str]] = None

    def _write(self, obj: Mapping[str, Any]) -> None:
        if self._fh is None:
            raise HdmpcIOError("Trace file is not open.", path=str(self.path))
        try:
            self._fh.write(json.dumps(obj) + "\n")
        except OSError as e:
            raise HdmpcIOError(f"Cannot write trace: {e.strerror}", path=str(self.path))

    def __enter__(self) -> "TraceWriter":
        try:
            self._fh = self.path.open("w", encoding="utf-8")
        except OSError as e:
            raise HdmpcIOError(f"Cannot open trace: {e.strerror}", path=str(self.path))
        self._write(self.header)
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_val: BaseException | None,
        exc_tb: object,
    ) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __call__(self, record: TraceRecord) -> None:
        self.write_step(record)

    def write_step(self, record: TraceRecord) -> None:
        self._write({"type": "step", **record.to_dict()})
        if self.outer_records:
            for sub in record.outer_records:
                self._write({"type": "outer", "t": record.t, **sub})
        self.steps_written += 1


@dataclass
class TraceContents:
    header: Dict[str, Any]
    steps: List[TraceRecord] = field(default_factory=list)
    outer: List[Dict[str, Any]] = field(default_factory=list)


def read_trace(path: Union[str, Path]) -> TraceContents:
    """Parse a trace file written by TraceWriter.

    Raises:
        HdmpcIOError: If the file cannot be read
        ParseError: On a malformed line or a missing header
    """
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise HdmpcIOError(f"Cannot read trace: {e.strerror}", path=str(path))
    contents: Optional[TraceContents] = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(e.msg, line=lineno, column=e.colno)
        kind = obj.pop("type", None)
        if contents is None:
            if kind != "header":
                raise ParseError("trace must start with a header", line=lineno, column=1)
            contents = TraceContents(header={"type": "header", **obj})
        elif kind == "step":
            contents.steps.append(TraceRecord.from_dict(obj))
        elif kind == "outer":
            contents.outer.append(obj)
        else:
            raise ParseError(f"unknown record type {kind!r}", line=lineno, column=1)
    if contents is None:
        raise ParseError("empty trace file", line=1, column=1)
    return contents
