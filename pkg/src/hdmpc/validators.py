#!/usr/bin/env python3
"""
hdmpc Input Validators

Provides validation functions for the matrices, vectors, boxes and polytopes
found in instance documents. All validators return the validated value
(as a numpy array where applicable) or raise ValidationError.
"""

from typing import Any, Optional, Sequence, cast

import numpy as np
from assistant_skills_lib.validators import validate_choice, validate_int

from .error_handler import DimensionMismatchError, UnboundedBoxError, ValidationError

INTERIOR_TOL = 1e-9
VERTEX_TOL = 1e-9


def validate_matrix(value: Any, rows: int, cols: int, name: str) -> np.ndarray:
    """
    Validate a dense row-major matrix with declared dimensions.
    """
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError("must be a numeric nested array", field=name)
    if rows == 0 or cols == 0:
        arr = arr.reshape(rows, cols) if arr.size == 0 else arr
    if arr.ndim != 2 or arr.shape != (rows, cols):
        raise DimensionMismatchError(
            "matrix shape does not match declared dimensions",
            expected=(rows, cols),
            actual=tuple(arr.shape),
            field=name,
        )
    if not np.all(np.isfinite(arr)):
        raise ValidationError("entries must be finite", field=name)
    return arr


def validate_vector(value: Any, length: int, name: str) -> np.ndarray:
    """
    Validate a real vector of the given length.
    """
    try:
        arr = np.asarray(value, dtype=float).reshape(-1)
    except (TypeError, ValueError):
        raise ValidationError("must be a numeric array", field=name)
    if arr.shape != (length,):
        raise DimensionMismatchError(
            "vector length does not match",
            expected=(length,),
            actual=tuple(arr.shape),
            field=name,
        )
    if np.any(np.isnan(arr)):
        raise ValidationError("entries must not be NaN", field=name)
    return arr


def validate_spd(matrix: np.ndarray, name: str) -> np.ndarray:
    """
    Validate that a matrix is symmetric positive definite.
    """
    if matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatchError(
            "matrix must be square",
            expected=(matrix.shape[0], matrix.shape[0]),
            actual=tuple(matrix.shape),
            field=name,
        )
    scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
    if not np.allclose(matrix, matrix.T, atol=1e-12 * scale):
        raise ValidationError("must be symmetric", field=name)
    if matrix.size and float(np.linalg.eigvalsh(matrix).min()) <= 0.0:
        raise ValidationError("must be positive definite", field=name)
    return matrix


def validate_box(
    lower: Any, upper: Any, length: int, name: str
) -> tuple[np.ndarray, np.ndarray]:
    """
    Validate a hyperbox with finite bounds and nonempty interior.
    """
    lo = validate_vector(lower, length, f"{name}.lower")
    hi = validate_vector(upper, length, f"{name}.upper")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise UnboundedBoxError(field=name)
    if np.any(lo >= hi):
        raise ValidationError("lower must be strictly below upper", field=name)
    return lo, hi


def validate_polytope_vertices(
    E: np.ndarray, f: np.ndarray, vertices: np.ndarray, name: str
) -> np.ndarray:
    """
    Validate that every listed vertex satisfies the inequalities and is an
    extreme point, i.e. has dim linearly independent active rows.
    """
    dim = E.shape[1]
    if vertices.ndim != 2 or vertices.shape[1] != dim:
        raise DimensionMismatchError(
            "vertex list does not match polytope dimension",
            expected=(vertices.shape[0] if vertices.ndim else 0, dim),
            actual=tuple(vertices.shape),
            field=f"{name}.vertices",
        )
    scale = 1.0 + np.abs(f)
    for idx, v in enumerate(vertices):
        slack = f - E @ v
        if np.any(slack < -VERTEX_TOL * scale):
            raise ValidationError(
                f"vertex {idx} violates the inequalities", field=f"{name}.vertices"
            )
        active = E[np.abs(slack) <= VERTEX_TOL * scale]
        if active.shape[0] == 0 or np.linalg.matrix_rank(active) < dim:
            raise ValidationError(
                f"vertex {idx} is not an extreme point", field=f"{name}.vertices"
            )
    return vertices


def validate_positive_float(value: Any, name: str) -> float:
    """
    Validate a strictly positive finite real.
    """
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ValidationError("must be a number", field=name)
    if not np.isfinite(number) or number <= 0.0:
        raise ValidationError("must be a positive finite number", field=name)
    return number


def validate_steps(steps: Any) -> int:
    """
    Validate a closed-loop step count.
    """
    return cast(int, validate_int(steps, "steps", min_value=0))


def validate_output_format(fmt: str) -> str:
    """
    Validate an output format name.
    """
    return cast(str, validate_choice(fmt, ["text", "json"], "output"))


def parse_state(text: str, length: Optional[int] = None) -> np.ndarray:
    """
    Parse a comma-separated state vector such as "1,-0.5".
    """
    parts: Sequence[str] = [p.strip() for p in text.split(",") if p.strip()]
    try:
        values = np.array([float(p) for p in parts], dtype=float)
    except ValueError:
        raise ValidationError(f"cannot parse {text!r}", field="state")
    if length is not None:
        return validate_vector(values, length, "state")
    return values
