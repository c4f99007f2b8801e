"""Tests for the exact reference solvers."""

from dataclasses import replace

import numpy as np
import pytest

from hdmpc.condense import eval_cost
from hdmpc.error_handler import InfeasibleError, InstanceTooLargeError, ValidationError
from hdmpc.oracle import (
    dual_function_exact,
    lagrangian_value,
    solve_box_qp_exact,
    solve_constrained_qp_exact,
)
from hdmpc.tighten import build_tightened, initial_norm_bound, slater_certificate


def _tighten(problem, x, u_bar):
    x = np.asarray(x, dtype=float)
    slater = slater_certificate(problem, u_bar, x)
    return build_tightened(problem, x, slater, initial_norm_bound(problem, x))


class TestBoxQp:
    """Tests for solve_box_qp_exact."""

    def test_clipped_at_upper_bound(self):
        u, value = solve_box_qp_exact(np.eye(1), [-4.0], [-1.0], [1.0])
        assert u == pytest.approx([1.0])
        assert value == pytest.approx(-3.0)

    def test_interior_minimizer(self):
        u, value = solve_box_qp_exact(np.eye(2), [-1.0, 1.0], [-1.0, -1.0], [1.0, 1.0])
        np.testing.assert_allclose(u, [0.5, -0.5])
        assert value == pytest.approx(-0.5)

    def test_beats_random_box_points(self):
        rng = np.random.default_rng(7)
        M = rng.normal(size=(4, 4))
        H = M @ M.T + 0.5 * np.eye(4)
        linear = rng.normal(scale=5.0, size=4)
        lo, hi = -np.ones(4), np.ones(4)
        _, value = solve_box_qp_exact(H, linear, lo, hi)
        for _ in range(500):
            v = rng.uniform(lo, hi)
            assert value <= v @ H @ v + linear @ v + 1e-12

    def test_cap(self):
        with pytest.raises(InstanceTooLargeError) as exc_info:
            solve_box_qp_exact(np.eye(3), np.zeros(3), -np.ones(3), np.ones(3), cap=2)
        assert exc_info.value.size == 3


class TestConstrainedQp:
    """Tests for solve_constrained_qp_exact on the scalar instance."""

    def test_unconstrained_optimum_is_feasible(self, scalar_problem):
        u, value = solve_constrained_qp_exact(scalar_problem, [1.0])
        assert u == pytest.approx([-0.25])
        assert value == pytest.approx(1.125)

    def test_terminal_row_active(self, scalar_problem):
        # x1 = 1.25 + u must stay at or below 0.5
        u, value = solve_constrained_qp_exact(scalar_problem, [2.5])
        assert u == pytest.approx([-0.75])
        assert value == pytest.approx(7.0625)

    def test_tightened_problem(self, scalar_problem):
        tight = _tighten(scalar_problem, [2.5], [-1.25])
        assert tight.c_t == pytest.approx(0.25)
        u, value = solve_constrained_qp_exact(tight)
        assert u == pytest.approx([-1.0])
        assert value == pytest.approx(7.3125)

    def test_state_required_without_tightening(self, scalar_problem):
        with pytest.raises(ValidationError):
            solve_constrained_qp_exact(scalar_problem)

    def test_infeasible(self, scalar_problem):
        tight = replace(_tighten(scalar_problem, [1.0], [-0.5]), c_t=10.0)
        with pytest.raises(InfeasibleError):
            solve_constrained_qp_exact(tight)

    def test_row_cap(self, twin_doc, twin_problem):
        with pytest.raises(InstanceTooLargeError):
            solve_constrained_qp_exact(twin_problem, twin_doc.x0, cap=19)

    def test_twin_optimum_beats_slater_vector(self, twin_doc, twin_problem):
        _, value = solve_constrained_qp_exact(twin_problem, twin_doc.x0)
        assert value <= eval_cost(twin_problem, twin_doc.u_bar0, twin_doc.x0) + 1e-12


class TestDualFunction:
    """Tests for lagrangian_value and dual_function_exact."""

    def test_lagrangian_at_zero_multiplier(self, scalar_problem):
        tight = _tighten(scalar_problem, [1.0], [-0.5])
        u = np.array([0.3])
        assert lagrangian_value(tight, u, np.zeros(4)) == pytest.approx(
            eval_cost(scalar_problem, u, [1.0])
        )

    def test_lagrangian_adds_weighted_rows(self, scalar_problem):
        tight = _tighten(scalar_problem, [1.0], [-0.5])
        u = np.array([0.3])
        mu = np.array([1.0, 0.0, 0.0, 2.0])
        g = tight.eval_constraints(u)
        expected = eval_cost(scalar_problem, u, [1.0]) + g[0] + 2.0 * g[3]
        assert lagrangian_value(tight, u, mu) == pytest.approx(expected)

    def test_zero_multiplier_gives_box_minimum(self, scalar_problem):
        tight = _tighten(scalar_problem, [1.0], [-0.5])
        assert dual_function_exact(tight, np.zeros(4)) == pytest.approx(1.125)

    def test_weak_duality(self, twin_doc, twin_problem):
        tight = _tighten(twin_problem, twin_doc.x0, twin_doc.u_bar0)
        _, f_star = solve_constrained_qp_exact(tight)
        rng = np.random.default_rng(11)
        for _ in range(25):
            mu = rng.exponential(size=twin_problem.m_c)
            assert dual_function_exact(tight, mu) <= f_star + 1e-9

    def test_negative_multiplier(self, scalar_problem):
        tight = _tighten(scalar_problem, [1.0], [-0.5])
        with pytest.raises(ValidationError):
            dual_function_exact(tight, np.array([-1.0, 0.0, 0.0, 0.0]))
