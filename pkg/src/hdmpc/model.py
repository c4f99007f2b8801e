#!/usr/bin/env python3
"""
Interconnected Subsystem Model

Represents the network of coupled linear subsystems

    x^i_{k+1} = sum_{j in N^i} (A^{ij} x^j_k + B^{ij} u^j_k)

assembles the centralized model x_{k+1} = A x_k + B u_k, and certifies the
structural assumptions the solver relies on: the decentralized gain K makes
A + BK Schur, and the terminal set Xf is invariant under A + BK.

Polytopes are stored as inequality systems E x <= f with an optional vertex
list. Vertices are enumerated at desk scale when not supplied.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import block_diag
from scipy.optimize import linprog

from .config_manager import DEFAULT_VERTEX_ENUMERATION_CAP
from .error_handler import (
    DimensionMismatchError,
    HorizonTooSmallError,
    NotBlockDiagonalKError,
    UnknownSubsystemError,
    ValidationError,
    VertexEnumerationTooLargeError,
)
from .validators import INTERIOR_TOL, validate_box, validate_spd

logger = logging.getLogger(__name__)

SCHUR_TOL = 1e-9


# =============================================================================
# Polytopes
# =============================================================================


@dataclass(frozen=True, eq=False)
class Polytope:
    """Polytope {x : E x <= f} with an optional explicit vertex list."""

    E: np.ndarray
    f: np.ndarray
    vertices: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        E = np.atleast_2d(np.asarray(self.E, dtype=float))
        f = np.asarray(self.f, dtype=float).reshape(-1)
        if E.shape[0] != f.shape[0]:
            raise DimensionMismatchError(
                "polytope E and f row counts differ",
                expected=(f.shape[0],),
                actual=(E.shape[0],),
            )
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "f", f)
        if self.vertices is not None:
            V = np.asarray(self.vertices, dtype=float).reshape(-1, E.shape[1])
            object.__setattr__(self, "vertices", V)

    @classmethod
    def unconstrained(cls, dim: int) -> "Polytope":
        """The whole space R^dim (no rows)."""
        return cls(np.zeros((0, dim)), np.zeros(0))

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float]) -> "Polytope":
        """Axis-aligned box with its vertex list."""
        lo = np.asarray(lower, dtype=float)
        hi = np.asarray(upper, dtype=float)
        dim = lo.shape[0]
        E = np.vstack([np.eye(dim), -np.eye(dim)])
        f = np.concatenate([hi, -lo])
        corners = np.array(list(itertools.product(*zip(lo, hi))), dtype=float)
        return cls(E, f, corners.reshape(-1, dim))

    @property
    def dim(self) -> int:
        return int(self.E.shape[1])

    @property
    def n_rows(self) -> int:
        return int(self.E.shape[0])

    def slack(self, x: np.ndarray) -> np.ndarray:
        """Return f - E x (nonnegative inside)."""
        return self.f - self.E @ np.asarray(x, dtype=float)

    def contains(self, x: np.ndarray, margin: float = 0.0) -> bool:
        """True when every slack is at least ``margin``."""
        if self.n_rows == 0:
            return True
        return bool(np.all(self.slack(x) >= margin))

    def interior_witness(self) -> Optional[np.ndarray]:
        """Return a point with all slacks > 1e-9, or None if none exists.

        Uses the vertex centroid when vertices are known, else a Chebyshev
        centre capped at radius 1.
        """
        if self.n_rows == 0:
            return np.zeros(self.dim)
        if self.vertices is not None and len(self.vertices):
            centroid = self.vertices.mean(axis=0)
            if self.contains(centroid, INTERIOR_TOL):
                return centroid
        norms = np.linalg.norm(self.E, axis=1)
        c = np.zeros(self.dim + 1)
        c[-1] = -1.0
        A_ub = np.hstack([self.E, norms[:, None]])
        bounds = [(None, None)] * self.dim + [(0.0, 1.0)]
        res = linprog(c, A_ub=A_ub, b_ub=self.f, bounds=bounds, method="highs")
        if res.status != 0 or -res.fun <= INTERIOR_TOL:
            return None
        return np.asarray(res.x[:-1], dtype=float)

    def enumerate_vertices(
        self, cap: int = DEFAULT_VERTEX_ENUMERATION_CAP
    ) -> np.ndarray:
        """Vertices of a bounded polytope by brute force over row subsets.

        Raises:
            VertexEnumerationTooLargeError: If the number of row subsets
                exceeds ``cap``
        """
        if self.vertices is not None:
            return self.vertices
        d = self.dim
        m = self.n_rows
        combos = math.comb(m, d) if m >= d else 0
        if combos > cap:
            raise VertexEnumerationTooLargeError(count=combos, cap=cap)
        found: List[np.ndarray] = []
        scale = 1.0 + np.abs(self.f)
        for rows in itertools.combinations(range(m), d):
            sub = self.E[list(rows)]
            if np.linalg.matrix_rank(sub) < d:
                continue
            v = np.linalg.solve(sub, self.f[list(rows)])
            if np.all(self.slack(v) >= -1e-9 * scale):
                if not any(np.allclose(v, w, atol=1e-10) for w in found):
                    found.append(v)
        logger.debug("enumerated %d vertices from %d row subsets", len(found), combos)
        return np.array(found, dtype=float).reshape(-1, d)


# =============================================================================
# Subsystems and network
# =============================================================================


@dataclass(frozen=True, eq=False)
class SubsystemSpec:
    """One subsystem i with its coupling blocks, weights, gain and input box.

    A_blocks and B_blocks map neighbour id -> matrix; the self block must be
    present in A_blocks.
    """

    index: int
    n: int
    m: int
    A_blocks: Mapping[int, np.ndarray]
    B_blocks: Mapping[int, np.ndarray]
    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray
    K: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray

    def __post_init__(self) -> None:
        name = f"subsystem[{self.index}]"
        if self.n < 1 or self.m < 1:
            raise ValidationError("dimensions must be positive", field=name)
        for attr, shape in (
            ("Q", (self.n, self.n)),
            ("R", (self.m, self.m)),
            ("P", (self.n, self.n)),
            ("K", (self.m, self.n)),
        ):
            value = np.asarray(getattr(self, attr), dtype=float)
            if value.shape != shape:
                raise DimensionMismatchError(
                    expected=shape, actual=tuple(value.shape), field=f"{name}.{attr}"
                )
            object.__setattr__(self, attr, value)
        for attr in ("Q", "R", "P"):
            validate_spd(getattr(self, attr), f"{name}.{attr}")
        lo, hi = validate_box(self.box_lo, self.box_hi, self.m, f"{name}.input_box")
        object.__setattr__(self, "box_lo", lo)
        object.__setattr__(self, "box_hi", hi)
        if self.index not in self.A_blocks:
            raise ValidationError("A_blocks must contain the self block", field=name)
        object.__setattr__(
            self,
            "A_blocks",
            {j: np.atleast_2d(np.asarray(b, dtype=float)) for j, b in self.A_blocks.items()},
        )
        object.__setattr__(
            self,
            "B_blocks",
            {j: np.atleast_2d(np.asarray(b, dtype=float)) for j, b in self.B_blocks.items()},
        )

    @property
    def neighbors(self) -> FrozenSet[int]:
        """N^i: ids appearing in either coupling map (always includes i)."""
        return frozenset(self.A_blocks) | frozenset(self.B_blocks) | {self.index}


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """The problem as the user states it: subsystems, horizon and polytopes."""

    subsystems: Tuple[SubsystemSpec, ...]
    N: int
    X: Polytope
    Xf: Polytope
    U: Polytope
    vertex_enumeration_cap: int = DEFAULT_VERTEX_ENUMERATION_CAP

    def __post_init__(self) -> None:
        object.__setattr__(self, "subsystems", tuple(self.subsystems))
        if self.N < 1:
            raise HorizonTooSmallError(field="horizon")
        if not self.subsystems:
            raise ValidationError("at least one subsystem is required", field="subsystems")
        ids = [s.index for s in self.subsystems]
        if len(set(ids)) != len(ids):
            raise ValidationError("subsystem ids must be unique", field="subsystems")
        _check_block_shapes(self)
        if self.Xf.n_rows == 0:
            raise ValidationError("terminal set must be bounded", field="polytopes.Xf")
        for name, poly, dim in (
            ("X", self.X, self.state_dim),
            ("Xf", self.Xf, self.state_dim),
            ("U", self.U, self.input_dim),
        ):
            if poly.dim != dim:
                raise DimensionMismatchError(
                    expected=(dim,), actual=(poly.dim,), field=f"polytopes.{name}"
                )
            if poly.interior_witness() is None:
                raise ValidationError("has no interior point", field=f"polytopes.{name}")
        for idx, v in enumerate(self.terminal_vertices()):
            if not self.X.contains(v, -1e-9):
                raise ValidationError(
                    f"vertex {idx} of Xf lies outside X", field="polytopes.Xf"
                )

    @property
    def ids(self) -> Tuple[int, ...]:
        return tuple(s.index for s in self.subsystems)

    @property
    def M(self) -> int:
        return len(self.subsystems)

    @property
    def state_dim(self) -> int:
        return sum(s.n for s in self.subsystems)

    @property
    def input_dim(self) -> int:
        return sum(s.m for s in self.subsystems)

    def subsystem(self, index: int) -> SubsystemSpec:
        for s in self.subsystems:
            if s.index == index:
                return s
        raise UnknownSubsystemError(subsystem=index)

    def terminal_vertices(self) -> np.ndarray:
        return self.Xf.enumerate_vertices(self.vertex_enumeration_cap)


def _check_block_shapes(network: NetworkSpec) -> None:
    dims = {s.index: (s.n, s.m) for s in network.subsystems}
    for s in network.subsystems:
        for kind, blocks, col in (("A", s.A_blocks, 0), ("B", s.B_blocks, 1)):
            for j, blk in blocks.items():
                if j not in dims:
                    raise UnknownSubsystemError(
                        subsystem=j, details={"referenced_by": s.index, "block": kind}
                    )
                expected = (s.n, dims[j][col])
                if blk.shape != expected:
                    raise DimensionMismatchError(
                        f"{kind}^{{{s.index}{j}}} shape is inconsistent",
                        expected=expected,
                        actual=tuple(blk.shape),
                        field=f"subsystem[{s.index}].{kind}_blocks[{j}]",
                    )


# =============================================================================
# Aggregate model
# =============================================================================


@dataclass(frozen=True, eq=False)
class AggregateModel:
    """Centralized x+ = A x + B u with block-diagonal weights and gain."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray
    K: np.ndarray
    state_slices: Mapping[int, slice]
    input_slices: Mapping[int, slice]


def _offsets(sizes: Sequence[Tuple[int, int]]) -> Dict[int, slice]:
    out: Dict[int, slice] = {}
    start = 0
    for index, size in sizes:
        out[index] = slice(start, start + size)
        start += size
    return out


def assemble_aggregate(network: NetworkSpec) -> AggregateModel:
    """Place every coupling block into the centralized A and B.

    Raises:
        DimensionMismatchError: If a block's shape contradicts neighbour dims
    """
    _check_block_shapes(network)
    xs = _offsets([(s.index, s.n) for s in network.subsystems])
    us = _offsets([(s.index, s.m) for s in network.subsystems])
    n_x, n_u = network.state_dim, network.input_dim
    A = np.zeros((n_x, n_x))
    B = np.zeros((n_x, n_u))
    for s in network.subsystems:
        for j, blk in s.A_blocks.items():
            A[xs[s.index], xs[j]] = blk
        for j, blk in s.B_blocks.items():
            B[xs[s.index], us[j]] = blk
    subs = network.subsystems
    return AggregateModel(
        A=A,
        B=B,
        Q=block_diag(*[s.Q for s in subs]),
        R=block_diag(*[s.R for s in subs]),
        P=block_diag(*[s.P for s in subs]),
        K=block_diag(*[s.K for s in subs]),
        state_slices=xs,
        input_slices=us,
    )


def spectral_radius(matrix: np.ndarray) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(matrix))))


@dataclass(frozen=True)
class SchurCertificate:
    radius: float
    passed: bool


@dataclass(frozen=True)
class InvarianceCertificate:
    """Terminal-set invariance under A + BK.

    Attributes:
        worst_margin: Minimum slack of (A+BK)v over the vertices v of Xf
        passed: worst_margin > 1e-9
        input_margin: Minimum slack of K v against the input box and U
        vertex_count: Number of vertices checked
    """

    worst_margin: float
    passed: bool
    input_margin: float
    vertex_count: int

    @property
    def admissible(self) -> bool:
        return self.input_margin > INTERIOR_TOL


def _check_block_diagonal(model: AggregateModel, K: np.ndarray) -> None:
    for i, rows in model.input_slices.items():
        for j, cols in model.state_slices.items():
            if i != j and np.any(K[rows, cols] != 0.0):
                raise NotBlockDiagonalKError(block=(i, j))


def _resolve_gain(model: AggregateModel, K: Optional[np.ndarray]) -> np.ndarray:
    """The aggregate gain to certify: the override when given, else model.K."""
    if K is None:
        return model.K
    gain = np.asarray(K, dtype=float)
    if gain.shape != model.K.shape:
        raise DimensionMismatchError(
            expected=model.K.shape, actual=tuple(gain.shape), field="K"
        )
    _check_block_diagonal(model, gain)
    return gain


def check_schur(
    network: NetworkSpec, K: Optional[np.ndarray] = None
) -> SchurCertificate:
    """Certify that A + BK is Schur.

    Args:
        network: The network
        K: Optional aggregate gain overriding the per-subsystem gains

    Raises:
        NotBlockDiagonalKError: If K couples different subsystems
    """
    model = assemble_aggregate(network)
    gain = _resolve_gain(model, K)
    radius = spectral_radius(model.A + model.B @ gain)
    logger.debug("spectral radius of A+BK: %.6g", radius)
    return SchurCertificate(radius=radius, passed=radius < 1.0 - SCHUR_TOL)


def check_terminal_invariance(
    network: NetworkSpec, K: Optional[np.ndarray] = None
) -> InvarianceCertificate:
    """Certify int(Xf) is mapped into int(Xf) by A + BK via its vertices.

    Args:
        network: The network
        K: Optional aggregate gain overriding the per-subsystem gains

    Raises:
        NotBlockDiagonalKError: If K couples different subsystems
        VertexEnumerationTooLargeError: If Xf's vertices cannot be enumerated
            within the configured cap
    """
    model = assemble_aggregate(network)
    gain = _resolve_gain(model, K)
    closed_loop = model.A + model.B @ gain
    vertices = network.terminal_vertices()
    lo = np.concatenate([s.box_lo for s in network.subsystems])
    hi = np.concatenate([s.box_hi for s in network.subsystems])
    worst = math.inf
    input_worst = math.inf
    for v in vertices:
        slack = network.Xf.slack(closed_loop @ v)
        if slack.size:
            worst = min(worst, float(slack.min()))
        u = gain @ v
        input_slacks = [u - lo, hi - u]
        if network.U.n_rows:
            input_slacks.append(network.U.slack(u))
        input_worst = min(input_worst, float(np.concatenate(input_slacks).min()))
    return InvarianceCertificate(
        worst_margin=worst,
        passed=worst > INTERIOR_TOL,
        input_margin=input_worst,
        vertex_count=len(vertices),
    )


# =============================================================================
# Coupling graph
# =============================================================================


@dataclass(frozen=True, eq=False)
class CouplingGraph:
    """Neighbour sets N^i and their r-step extensions.

    Extensions are computed up front until they reach a fixed point, so the
    graph is immutable after construction.
    """

    neighbors: Mapping[int, FrozenSet[int]]
    _levels: Dict[int, List[FrozenSet[int]]] = field(
        default_factory=dict, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        for i, nbrs in self.neighbors.items():
            unknown = set(nbrs) - set(self.neighbors)
            if unknown:
                raise UnknownSubsystemError(subsystem=min(unknown))
        levels: Dict[int, List[FrozenSet[int]]] = {}
        for i in self.neighbors:
            current = frozenset(self.neighbors[i]) | {i}
            chain = [current]
            while True:
                nxt = frozenset().union(*(self.neighbors[j] for j in current)) | current
                if nxt == current:
                    break
                chain.append(nxt)
                current = nxt
            levels[i] = chain
        self._levels.update(levels)

    def extended(self, i: int, r: int) -> FrozenSet[int]:
        if i not in self._levels:
            raise UnknownSubsystemError(subsystem=i)
        chain = self._levels[i]
        return chain[min(r, len(chain)) - 1]

    def symmetrized(self) -> "CouplingGraph":
        """Graph with j in N^i whenever i in N^j."""
        sym: Dict[int, set] = {i: set(n) for i, n in self.neighbors.items()}
        for i, nbrs in self.neighbors.items():
            for j in nbrs:
                sym[j].add(i)
        return CouplingGraph({i: frozenset(n) for i, n in sym.items()})


def coupling_graph(network: NetworkSpec) -> CouplingGraph:
    return CouplingGraph({s.index: s.neighbors for s in network.subsystems})


def extended_neighborhood(graph: CouplingGraph, i: int, r: int) -> FrozenSet[int]:
    """N^i_r with N^i_1 = N^i and N^i_r the union of N^j over j in N^i_{r-1}.

    Raises:
        UnknownSubsystemError: If i is not in the graph
    """
    if r < 1:
        raise ValidationError("must be at least 1", field="r")
    return graph.extended(i, r)
