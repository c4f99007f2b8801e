#!/usr/bin/env python3
"""
Shared pytest fixtures for hdmpc tests.

Provides common fixtures used across all tests.
This root conftest.py centralizes:
- pytest hooks (configure, collection_modifyitems)
- Fixture instance documents shipped in tests/fixtures
- Small hand-checkable networks (scalar, TWIN, chain)
- A seeded builder for random certified instances
"""

from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pytest

from hdmpc import (
    NetworkSpec,
    Polytope,
    SubsystemSpec,
    certify_contraction,
    check_schur,
    check_terminal_invariance,
    condense,
    load_config,
    slater_certificate,
)

FIXTURES_DIR = Path(__file__).parent / "fixtures"

# =============================================================================
# PYTEST HOOKS
# =============================================================================


def pytest_addoption(parser):
    """Add custom command-line options."""
    parser.addoption(
        "--skip-slow", action="store_true", default=False, help="Skip slow tests"
    )


def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line("markers", "unit: Unit tests (fast, no external calls)")
    config.addinivalue_line("markers", "slow: Slow running tests")
    config.addinivalue_line(
        "markers", "acceptance: Property-based runs over seeded random instances"
    )


def pytest_collection_modifyitems(config, items):
    """Skip slow tests when --skip-slow is provided."""
    if config.getoption("--skip-slow"):
        skip_slow = pytest.mark.skip(reason="--skip-slow given")
        for item in items:
            if "slow" in item.keywords:
                item.add_marker(skip_slow)


# =============================================================================
# FIXTURE DOCUMENTS
# =============================================================================


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES_DIR


@pytest.fixture
def twin_path() -> Path:
    return FIXTURES_DIR / "twin.json"


@pytest.fixture
def scalar_path() -> Path:
    return FIXTURES_DIR / "scalar.json"


@pytest.fixture
def stable_scalar_path() -> Path:
    return FIXTURES_DIR / "stable_scalar.json"


@pytest.fixture
def strongly_coupled_path() -> Path:
    return FIXTURES_DIR / "strongly_coupled.json"


@pytest.fixture
def non_schur_path() -> Path:
    return FIXTURES_DIR / "non_schur.json"


@pytest.fixture
def twin_doc(twin_path):
    """Two scalar subsystems coupled through A, N = 2."""
    return load_config(twin_path)


@pytest.fixture
def twin_network(twin_doc):
    return twin_doc.network


@pytest.fixture
def twin_problem(twin_network):
    return condense(twin_network)


@pytest.fixture
def scalar_doc(scalar_path):
    """One scalar subsystem, N = 1."""
    return load_config(scalar_path)


@pytest.fixture
def scalar_problem(scalar_doc):
    return condense(scalar_doc.network)


# =============================================================================
# NETWORK BUILDERS
# =============================================================================


def scalar_subsystem(
    index: int,
    A: Dict[int, float],
    B: Dict[int, float],
    P: float = 3.0,
    K: float = 0.0,
    box: float = 1.0,
) -> SubsystemSpec:
    """A subsystem with n = m = 1 and unit Q and R."""
    return SubsystemSpec(
        index=index,
        n=1,
        m=1,
        A_blocks={j: np.array([[a]]) for j, a in A.items()},
        B_blocks={j: np.array([[b]]) for j, b in B.items()},
        Q=np.eye(1),
        R=np.eye(1),
        P=np.array([[P]]),
        K=np.array([[K]]),
        box_lo=np.array([-box]),
        box_hi=np.array([box]),
    )


def box_network(
    subsystems: List[SubsystemSpec],
    N: int,
    x_bound: float = 2.0,
    xf_bound: float = 0.5,
    with_u: bool = False,
) -> NetworkSpec:
    """Network with box-shaped X and Xf; U is unconstrained unless requested."""
    n_x = sum(s.n for s in subsystems)
    n_m = sum(s.m for s in subsystems)
    if with_u:
        U = Polytope(np.vstack([np.ones((1, n_m)), -np.ones((1, n_m))]), np.full(2, 1.5))
    else:
        U = Polytope.unconstrained(n_m)
    return NetworkSpec(
        subsystems=tuple(subsystems),
        N=N,
        X=Polytope.box([-x_bound] * n_x, [x_bound] * n_x),
        Xf=Polytope.box([-xf_bound] * n_x, [xf_bound] * n_x),
        U=U,
    )


def deadbeat_slater(network: NetworkSpec, x0: np.ndarray) -> np.ndarray:
    """Subsystem-major inputs that drive x0 to the origin in one step.

    Assumes B = I; the first input cancels A x0 and every later input is zero.
    """
    from hdmpc import assemble_aggregate

    p = condense(network)
    A = assemble_aggregate(network).A
    seq = np.zeros((network.N, network.input_dim))
    seq[0] = -A @ x0
    return p.from_time_major(seq)


@pytest.fixture
def chain_network():
    """Three scalar subsystems in a line, 0 - 1 - 2, N = 2."""
    subs = [
        scalar_subsystem(0, {0: 0.4, 1: 0.05}, {0: 1.0}, K=-0.4),
        scalar_subsystem(1, {0: 0.05, 1: 0.4, 2: 0.05}, {1: 1.0}, K=-0.4),
        scalar_subsystem(2, {1: 0.05, 2: 0.4}, {2: 1.0}, K=-0.4),
    ]
    return box_network(subs, N=2)


# =============================================================================
# RANDOM CERTIFIED INSTANCES
# =============================================================================

RANDOM_CANDIDATES = 200


def terminal_slater(network: NetworkSpec, x0: np.ndarray) -> np.ndarray:
    """Subsystem-major inputs u_k = K x_k along the terminal closed loop."""
    from hdmpc import assemble_aggregate

    model = assemble_aggregate(network)
    seq = np.zeros((network.N, network.input_dim))
    x = np.asarray(x0, dtype=float)
    for k in range(network.N):
        seq[k] = model.K @ x
        x = model.A @ x + model.B @ seq[k]
    return condense(network).from_time_major(seq)


Instance = Tuple[NetworkSpec, np.ndarray, np.ndarray]


def _draw_instance(rng: np.random.Generator) -> Optional[Instance]:
    M = int(rng.integers(1, 4))
    dims = [(int(rng.integers(1, 3)), int(rng.integers(1, 3))) for _ in range(M)]
    # 2 N (n_x + n_u) constraint and box rows must fit the exact oracle
    width = sum(n + m for n, m in dims)
    if width > 10:
        return None
    N = int(rng.integers(1, min(4, 10 // width) + 1))
    subs = []
    for i, (n, m) in enumerate(dims):
        A = {i: rng.uniform(-0.3, 0.3, size=(n, n))}
        B = {i: rng.uniform(-1.0, 1.0, size=(n, m))}
        for j in sorted({(i - 1) % M, (i + 1) % M} - {i}):
            A[j] = rng.uniform(-0.05, 0.05, size=(n, dims[j][0]))
            B[j] = rng.uniform(-0.1, 0.1, size=(n, dims[j][1]))
        subs.append(
            SubsystemSpec(
                index=i,
                n=n,
                m=m,
                A_blocks=A,
                B_blocks=B,
                Q=np.eye(n),
                R=np.eye(m),
                P=3.0 * np.eye(n),
                K=-0.2 * B[i].T @ A[i],
                box_lo=-np.ones(m),
                box_hi=np.ones(m),
            )
        )
    network = box_network(subs, N=N)
    x0 = rng.uniform(-0.25, 0.25, size=network.state_dim)
    return network, x0, terminal_slater(network, x0)


def _certifies(network: NetworkSpec, x0: np.ndarray, u_bar: np.ndarray) -> bool:
    p = condense(network)
    invariance = check_terminal_invariance(network)
    return (
        check_schur(network).passed
        and invariance.passed
        and invariance.admissible
        and slater_certificate(p, u_bar, x0).is_strict
        and certify_contraction(p, strict=False).passed
    )


def random_instance(seed: int) -> Instance:
    """A seeded instance that passes the static certification checks.

    One to three subsystems on a ring, each with one or two states and
    inputs, coupled through both A and B. The terminal gain is a small
    damping of the local dynamics and P = 3I. x0 lies in the inner half of Xf
    and the Slater vector follows the terminal closed loop from x0. Draws that
    fail a check are discarded.
    """
    rng = np.random.default_rng(seed)
    for _ in range(RANDOM_CANDIDATES):
        candidate = _draw_instance(rng)
        if candidate is not None and _certifies(*candidate):
            return candidate
    raise RuntimeError(f"no certified instance drawn for seed {seed}")
