#!/usr/bin/env python3
"""
Instance documents

Loads, validates and writes the JSON problem description:

    {
      "schema_version": 1,
      "horizon": N,
      "subsystems": [
        {"index": i, "n": n_i, "m": m_i,
         "A_blocks": [{"neighbor": j, "rows": .., "cols": .., "data": [[..]]}],
         "B_blocks": [...],
         "Q": {"rows": .., "cols": .., "data": [[..]]}, "R": .., "P": .., "K": ..,
         "input_box": {"lower": [..], "upper": [..]}}
      ],
      "polytopes": {"X": {"E": {..}, "f": [..], "vertices": [[..]]}, "Xf": .., "U": ..},
      "x0": [..], "u_bar0": [..], "delta0": 1.25,
      "solver": {...},
      "K": {...}
    }

Matrices are row-major with explicit dimensions. "vertices", "delta0",
"solver" and the aggregate "K" are optional.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import numpy as np

from .condense import condense
from .error_handler import (
    DimensionMismatchError,
    HdmpcIOError,
    ParseError,
    ValidationError,
)
from .model import NetworkSpec, Polytope, SubsystemSpec
from .tighten import slater_certificate
from .validators import (
    validate_box,
    validate_matrix,
    validate_polytope_vertices,
    validate_positive_float,
    validate_spd,
    validate_vector,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class ConfigDocument:
    """A validated instance document.

    Attributes:
        network: The validated network
        x0: Initial aggregate state
        u_bar0: Slater vector at t = 0 (subsystem-major)
        delta0: Cost-decrease budget at t = 0; None selects x0'Qx0 / 2
        solver: Raw "solver" section
        K: Optional aggregate gain override
        raw: The parsed document, for round trips and hashing
    """

    network: NetworkSpec
    x0: np.ndarray
    u_bar0: np.ndarray
    delta0: Optional[float] = None
    solver: Mapping[str, Any] = field(default_factory=dict)
    K: Optional[np.ndarray] = None
    schema_version: int = SCHEMA_VERSION
    raw: Mapping[str, Any] = field(default_factory=dict)


def _require(data: Mapping[str, Any], key: str, path: str) -> Any:
    if not isinstance(data, Mapping) or key not in data:
        raise ValidationError("is required", field=f"{path}.{key}" if path else key)
    return data[key]


def _matrix(data: Any, path: str) -> np.ndarray:
    if not isinstance(data, Mapping):
        raise ValidationError("must be an object with rows, cols and data", field=path)
    rows = _require(data, "rows", path)
    cols = _require(data, "cols", path)
    if not (isinstance(rows, int) and isinstance(cols, int)) or rows < 0 or cols < 0:
        raise ValidationError("rows and cols must be non-negative integers", field=path)
    values = _require(data, "data", path)
    if rows == 0:
        return np.zeros((0, cols))
    return validate_matrix(values, rows, cols, f"{path}.data")


def _blocks(items: Any, path: str) -> Dict[int, np.ndarray]:
    if not isinstance(items, list):
        raise ValidationError("must be a list", field=path)
    out: Dict[int, np.ndarray] = {}
    for pos, item in enumerate(items):
        item_path = f"{path}[{pos}]"
        j = _require(item, "neighbor", item_path)
        if not isinstance(j, int):
            raise ValidationError("must be an integer", field=f"{item_path}.neighbor")
        if j in out:
            raise ValidationError(f"duplicate block for neighbor {j}", field=item_path)
        out[j] = _matrix(item, item_path)
    return out


def _subsystem(data: Any, pos: int) -> SubsystemSpec:
    path = f"subsystems[{pos}]"
    index = _require(data, "index", path)
    n = _require(data, "n", path)
    m = _require(data, "m", path)
    for key, value in (("index", index), ("n", n), ("m", m)):
        if not isinstance(value, int):
            raise ValidationError("must be an integer", field=f"{path}.{key}")
    mats = {}
    for key, shape in (("Q", (n, n)), ("R", (m, m)), ("P", (n, n)), ("K", (m, n))):
        mat = _matrix(_require(data, key, path), f"{path}.{key}")
        if mat.shape != shape:
            raise DimensionMismatchError(
                expected=shape, actual=tuple(mat.shape), field=f"{path}.{key}"
            )
        if key != "K":
            validate_spd(mat, f"{path}.{key}")
        mats[key] = mat
    box = _require(data, "input_box", path)
    lo, hi = validate_box(
        _require(box, "lower", f"{path}.input_box"),
        _require(box, "upper", f"{path}.input_box"),
        m,
        f"{path}.input_box",
    )
    return SubsystemSpec(
        index=index,
        n=n,
        m=m,
        A_blocks=_blocks(_require(data, "A_blocks", path), f"{path}.A_blocks"),
        B_blocks=_blocks(data.get("B_blocks", []), f"{path}.B_blocks"),
        Q=mats["Q"],
        R=mats["R"],
        P=mats["P"],
        K=mats["K"],
        box_lo=lo,
        box_hi=hi,
    )


def _polytope(data: Any, dim: int, path: str) -> Polytope:
    E = _matrix(_require(data, "E", path), f"{path}.E")
    if E.shape[1] != dim:
        raise DimensionMismatchError(expected=(E.shape[0], dim), actual=E.shape, field=f"{path}.E")
    f = validate_vector(_require(data, "f", path), E.shape[0], f"{path}.f")
    vertices = None
    if data.get("vertices") is not None:
        try:
            V = np.asarray(data["vertices"], dtype=float).reshape(-1, dim)
        except (TypeError, ValueError):
            raise ValidationError("must be a list of points", field=f"{path}.vertices")
        vertices = validate_polytope_vertices(E, f, V, path)
    return Polytope(E, f, vertices)


def parse_config(data: Mapping[str, Any]) -> ConfigDocument:
    """Validate a parsed document.

    Raises:
        ValidationError: With the dotted path of the first offending field
    """
    if not isinstance(data, Mapping):
        raise ValidationError("document must be a JSON object", field="$")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValidationError(f"unsupported version {version!r}", field="schema_version")
    horizon = _require(data, "horizon", "")
    if not isinstance(horizon, int):
        raise ValidationError("must be an integer", field="horizon")
    subs_raw = _require(data, "subsystems", "")
    if not isinstance(subs_raw, list) or not subs_raw:
        raise ValidationError("must be a non-empty list", field="subsystems")
    subsystems = [_subsystem(item, pos) for pos, item in enumerate(subs_raw)]
    n_x = sum(s.n for s in subsystems)
    n_m = sum(s.m for s in subsystems)
    polys = _require(data, "polytopes", "")
    solver = dict(data.get("solver") or {})
    network = NetworkSpec(
        subsystems=tuple(subsystems),
        N=horizon,
        X=_polytope(_require(polys, "X", "polytopes"), n_x, "polytopes.X"),
        Xf=_polytope(_require(polys, "Xf", "polytopes"), n_x, "polytopes.Xf"),
        U=_polytope(_require(polys, "U", "polytopes"), n_m, "polytopes.U"),
        **(
            {"vertex_enumeration_cap": int(solver["vertex_enumeration_cap"])}
            if "vertex_enumeration_cap" in solver
            else {}
        ),
    )
    x0 = validate_vector(_require(data, "x0", ""), n_x, "x0")
    u_bar0 = validate_vector(_require(data, "u_bar0", ""), n_m * horizon, "u_bar0")
    delta0 = None
    if data.get("delta0") is not None:
        delta0 = validate_positive_float(data["delta0"], "delta0")
    K = None
    if data.get("K") is not None:
        K = _matrix(data["K"], "K")
    if not network.X.contains(x0):
        raise ValidationError("initial state lies outside X", field="x0")
    p = condense(network)
    if np.any(u_bar0 < p.box_lo) or np.any(u_bar0 > p.box_hi):
        raise ValidationError("lies outside the input box", field="u_bar0")
    slater = slater_certificate(p, u_bar0, x0)
    if not slater.is_strict:
        raise ValidationError("Slater margin <= 0", field="u_bar0")
    return ConfigDocument(
        network=network,
        x0=x0,
        u_bar0=u_bar0,
        delta0=delta0,
        solver=solver,
        K=K,
        schema_version=version,
        raw=dict(data),
    )


def load_config(path: Union[str, Path]) -> ConfigDocument:
    """Read and validate an instance document.

    Raises:
        HdmpcIOError: If the file cannot be read
        ParseError: If it is not valid JSON
        ValidationError: If any field is invalid
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise HdmpcIOError(f"Cannot read instance: {e.strerror}", path=str(path))
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, line=e.lineno, column=e.colno)
    doc = parse_config(data)
    logger.debug("loaded %s: M=%d N=%d", path, doc.network.M, doc.network.N)
    return doc


# =============================================================================
# Serialization
# =============================================================================


def _matrix_dict(mat: np.ndarray) -> Dict[str, Any]:
    return {
        "rows": int(mat.shape[0]),
        "cols": int(mat.shape[1]),
        "data": [[float(v) for v in row] for row in mat],
    }


def _polytope_dict(poly: Polytope) -> Dict[str, Any]:
    out: Dict[str, Any] = {"E": _matrix_dict(poly.E), "f": [float(v) for v in poly.f]}
    if poly.vertices is not None:
        out["vertices"] = [[float(v) for v in row] for row in poly.vertices]
    return out


def config_to_dict(doc: ConfigDocument) -> Dict[str, Any]:
    """Canonical document form of a ConfigDocument."""
    subsystems: List[Dict[str, Any]] = []
    for s in doc.network.subsystems:
        subsystems.append(
            {
                "index": s.index,
                "n": s.n,
                "m": s.m,
                "A_blocks": [
                    {"neighbor": j, **_matrix_dict(b)} for j, b in sorted(s.A_blocks.items())
                ],
                "B_blocks": [
                    {"neighbor": j, **_matrix_dict(b)} for j, b in sorted(s.B_blocks.items())
                ],
                "Q": _matrix_dict(s.Q),
                "R": _matrix_dict(s.R),
                "P": _matrix_dict(s.P),
                "K": _matrix_dict(s.K),
                "input_box": {
                    "lower": [float(v) for v in s.box_lo],
                    "upper": [float(v) for v in s.box_hi],
                },
            }
        )
    out: Dict[str, Any] = {
        "schema_version": doc.schema_version,
        "horizon": doc.network.N,
        "subsystems": subsystems,
        "polytopes": {
            "X": _polytope_dict(doc.network.X),
            "Xf": _polytope_dict(doc.network.Xf),
            "U": _polytope_dict(doc.network.U),
        },
        "x0": [float(v) for v in doc.x0],
        "u_bar0": [float(v) for v in doc.u_bar0],
    }
    if doc.delta0 is not None:
        out["delta0"] = doc.delta0
    if doc.solver:
        out["solver"] = dict(doc.solver)
    if doc.K is not None:
        out["K"] = _matrix_dict(doc.K)
    return out


def dump_config(doc: ConfigDocument, path: Union[str, Path]) -> None:
    """
    Raises:
        HdmpcIOError: If the file cannot be written
    """
    try:
        Path(path).write_text(json.dumps(config_to_dict(doc), indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise HdmpcIOError(f"Cannot write instance: {e.strerror}", path=str(path))


def instance_hash(doc: ConfigDocument) -> str:
    """sha256 of the canonical JSON of the document."""
    canonical = json.dumps(config_to_dict(doc), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
