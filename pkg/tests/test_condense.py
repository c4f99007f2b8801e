"""Tests for condense module."""

import numpy as np
import pytest

from hdmpc.condense import (
    condense,
    eval_constraints,
    eval_cost,
    rollout,
    rollout_constraints,
    rollout_cost,
)
from hdmpc.error_handler import DimensionMismatchError
from hdmpc.model import coupling_graph

from .conftest import random_instance


class TestScalarProblem:
    """Closed-form checks on the one-step scalar instance."""

    def test_dense_data(self, scalar_problem):
        np.testing.assert_allclose(scalar_problem.H, [[2.0]])
        np.testing.assert_allclose(scalar_problem.G, [[1.0]])
        np.testing.assert_allclose(scalar_problem.W, [[1.25]])

    def test_rows(self, scalar_problem):
        assert scalar_problem.m_c == 4
        assert scalar_problem.row_labels[0].startswith("Xf[k=1")
        assert scalar_problem.row_labels[2].startswith("U[k=0")

    def test_cost_at_slater(self, scalar_problem):
        assert eval_cost(scalar_problem, [-0.5], [1.0]) == pytest.approx(1.25)

    def test_constraints_at_slater(self, scalar_problem):
        # x1 = 0, u = -0.5
        g = eval_constraints(scalar_problem, [-0.5], [1.0])
        np.testing.assert_allclose(g, [-0.5, -0.5, -2.4, -1.4])


class TestTwinProblem:
    """Checks on the coupled two-subsystem instance."""

    def test_shape(self, twin_problem):
        assert twin_problem.n_u == 4
        assert twin_problem.n_x == 2
        assert twin_problem.N == 2
        assert twin_problem.m_c == 12
        assert twin_problem.block_ids == (0, 1)

    def test_subsystem_major_blocks(self, twin_problem):
        assert twin_problem.blocks[0] == slice(0, 2)
        assert twin_problem.blocks[1] == slice(2, 4)
        np.testing.assert_array_equal(twin_problem.perm, [0, 2, 1, 3])

    def test_hessian_blocks(self, twin_problem):
        np.testing.assert_allclose(twin_problem.block(twin_problem.H, 0, 0), [[2.52, 1.0], [1.0, 3.0]])
        np.testing.assert_allclose(twin_problem.block(twin_problem.H, 0, 1), [[0.2, 0.2], [0.2, 0.0]])

    def test_hessian_symmetric_positive_definite(self, twin_problem):
        H = twin_problem.H
        np.testing.assert_allclose(H, H.T)
        assert np.linalg.eigvalsh(H).min() > 0.0

    def test_time_major_round_trip(self, twin_problem):
        u = np.array([1.0, 2.0, 3.0, 4.0])
        seq = twin_problem.to_time_major(u)
        np.testing.assert_allclose(seq, [[1.0, 3.0], [2.0, 4.0]])
        np.testing.assert_allclose(twin_problem.from_time_major(seq), u)

    def test_cost_at_slater(self, twin_doc, twin_problem):
        assert eval_cost(twin_problem, twin_doc.u_bar0, twin_doc.x0) == pytest.approx(1.578375)

    def test_dimension_check(self, twin_problem):
        with pytest.raises(DimensionMismatchError):
            eval_cost(twin_problem, np.zeros(3), np.zeros(2))
        with pytest.raises(DimensionMismatchError):
            eval_constraints(twin_problem, np.zeros(4), np.zeros(3))


class TestRolloutAgreement:
    """The dense form matches simulating the dynamics."""

    @pytest.mark.parametrize("seed", range(5))
    def test_cost_and_constraints(self, seed):
        network, x0, _ = random_instance(seed)
        p = condense(network)
        rng = np.random.default_rng(100 + seed)
        u = rng.uniform(-1.0, 1.0, size=p.n_u)
        seq = p.to_time_major(u)
        assert eval_cost(p, u, x0) == pytest.approx(rollout_cost(network, x0, seq))
        np.testing.assert_allclose(
            eval_constraints(p, u, x0), rollout_constraints(network, x0, seq), atol=1e-12
        )

    def test_rollout_twin(self, twin_network):
        traj = rollout(twin_network, [1.0, -0.5], [[-0.5, 0.25], [0.025, -0.05]])
        np.testing.assert_allclose(traj[1], [-0.05, 0.1])
        np.testing.assert_allclose(traj[2], [0.01, -0.005])

    def test_rollout_state_length(self, twin_network):
        with pytest.raises(DimensionMismatchError):
            rollout(twin_network, [1.0], [[0.0, 0.0]])


class TestUnconstrainedInput:
    """A network without a coupled input constraint has no U rows."""

    def test_no_u_rows(self, chain_network):
        p = condense(chain_network)
        # X rows for k = 1 and Xf rows for k = 2, each 6 rows
        assert p.m_c == 12
        assert all(not label.startswith("U") for label in p.row_labels)


def _hessian_reach(network):
    p = condense(network)
    graph = coupling_graph(network).symmetrized()
    for i, rows in p.blocks.items():
        reach = graph.extended(i, 2 * network.N)
        for j, cols in p.blocks.items():
            if np.any(p.H[rows, cols] != 0.0):
                assert j in reach, f"H[{i},{j}] couples outside N^{i}_{2 * network.N}"


class TestHessianSparsity:
    """H_ij vanishes unless j is within 2N hops of i."""

    @pytest.mark.parametrize("seed", range(10))
    def test_random_instances(self, seed):
        network, _, _ = random_instance(seed)
        _hessian_reach(network)

    def test_chain(self, chain_network):
        _hessian_reach(chain_network)
