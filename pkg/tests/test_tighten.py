"""Tests for tighten module."""

import math

import numpy as np
import pytest

from hdmpc.condense import eval_constraints
from hdmpc.error_handler import (
    DimensionMismatchError,
    PredictedTerminalOutsideXfError,
    SlaterViolatedError,
    ValidationError,
)
from hdmpc.tighten import (
    SlaterCertificate,
    build_tightened,
    choose_margin,
    initial_norm_bound,
    shift_slater,
    slater_certificate,
    update_norm_bound,
)


class TestSlaterCertificate:
    """Tests for slater_certificate."""

    def test_scalar_margins(self, scalar_problem):
        cert = slater_certificate(scalar_problem, [-0.5], [1.0])
        np.testing.assert_allclose(cert.margins, [0.5, 0.5, 2.4, 1.4])
        assert cert.min_margin == pytest.approx(0.5)
        assert cert.is_strict

    def test_twin_margin_set_by_terminal_row(self, twin_doc, twin_problem):
        cert = slater_certificate(twin_problem, twin_doc.u_bar0, twin_doc.x0)
        assert cert.min_margin == pytest.approx(0.49)
        assert twin_problem.row_labels[int(np.argmin(cert.margins))].startswith("Xf")

    def test_outside_box_raises(self, scalar_problem):
        with pytest.raises(SlaterViolatedError):
            slater_certificate(scalar_problem, [2.5], [1.0])

    def test_wrong_length_raises(self, scalar_problem):
        with pytest.raises(DimensionMismatchError):
            slater_certificate(scalar_problem, [0.0, 0.0], [1.0])

    def test_infeasible_point_is_not_strict(self, scalar_problem):
        # u = 0.5 gives x1 = 1, outside Xf
        cert = slater_certificate(scalar_problem, [0.5], [1.0])
        assert not cert.is_strict


class TestChooseMargin:
    """Tests for choose_margin."""

    def _cert(self, margin):
        return SlaterCertificate(u_bar=np.zeros(1), margins=np.array([margin]), min_margin=margin)

    def test_half_margin(self):
        assert choose_margin(self._cert(0.49)) == pytest.approx(0.245)

    def test_custom_ratio(self):
        assert choose_margin(self._cert(1.0), ratio=0.25) == pytest.approx(0.25)

    @pytest.mark.parametrize("ratio", [0.0, 1.0])
    def test_ratio_bounds(self, ratio):
        with pytest.raises(ValidationError):
            choose_margin(self._cert(1.0), ratio=ratio)

    def test_non_positive_margin(self):
        with pytest.raises(SlaterViolatedError) as exc_info:
            choose_margin(self._cert(-0.1))
        assert exc_info.value.min_margin == pytest.approx(-0.1)


class TestNormBounds:
    """Tests for initial_norm_bound and update_norm_bound."""

    def test_scalar_exact_vertex_max(self, scalar_problem):
        # At u = 2: g = (2, -3, 0.1, -3.9)
        assert initial_norm_bound(scalar_problem, [1.0]) == pytest.approx(math.sqrt(28.22))

    def test_over_bound_dominates_exact(self, twin_doc, twin_problem):
        exact = initial_norm_bound(twin_problem, twin_doc.x0)
        loose = initial_norm_bound(twin_problem, twin_doc.x0, vertex_limit=0)
        assert loose >= exact

    def test_bound_covers_random_box_points(self, twin_doc, twin_problem):
        L0 = initial_norm_bound(twin_problem, twin_doc.x0)
        rng = np.random.default_rng(3)
        for _ in range(200):
            u = rng.uniform(twin_problem.box_lo, twin_problem.box_hi)
            g = eval_constraints(twin_problem, u, twin_doc.x0)
            assert np.linalg.norm(g) <= L0 + 1e-12

    def test_update_adds_state_shift(self, scalar_problem):
        L1 = update_norm_bound(2.0, scalar_problem.Xi, [0.0], [1.0])
        assert L1 == pytest.approx(2.0 + math.sqrt(0.5))

    def test_update_without_rows(self):
        assert update_norm_bound(1.5, np.zeros((0, 2)), [1.0, 1.0], [0.0, 0.0]) == 1.5


class TestBuildTightened:
    """Tests for build_tightened."""

    def test_constants(self, twin_doc, twin_problem):
        slater = slater_certificate(twin_problem, twin_doc.u_bar0, twin_doc.x0)
        tight = build_tightened(twin_problem, twin_doc.x0, slater, L_t=4.0)
        assert tight.c_t == pytest.approx(0.245)
        assert tight.gamma_t == pytest.approx(0.245)
        assert tight.Lp_t == pytest.approx(4.245)

    def test_offset_matches_constraints_at_zero(self, twin_doc, twin_problem):
        slater = slater_certificate(twin_problem, twin_doc.u_bar0, twin_doc.x0)
        tight = build_tightened(twin_problem, twin_doc.x0, slater, L_t=4.0)
        np.testing.assert_allclose(
            tight.constraint_offset, tight.eval_constraints(np.zeros(twin_problem.n_u))
        )

    def test_slater_strictly_feasible_for_tightened(self, twin_doc, twin_problem):
        slater = slater_certificate(twin_problem, twin_doc.u_bar0, twin_doc.x0)
        tight = build_tightened(twin_problem, twin_doc.x0, slater, L_t=4.0)
        assert tight.eval_constraints(slater.u_bar).max() == pytest.approx(-tight.gamma_t)


class TestShiftSlater:
    """Tests for shift_slater."""

    def test_twin_shift(self, twin_doc, twin_network, twin_problem):
        shifted = shift_slater(twin_network, twin_problem, twin_doc.u_bar0, twin_doc.x0)
        np.testing.assert_allclose(shifted, [0.025, -0.005, -0.05, 0.0025])

    def test_shifted_vector_is_feasible_at_next_state(self, twin_doc, twin_network, twin_problem):
        shifted = shift_slater(twin_network, twin_problem, twin_doc.u_bar0, twin_doc.x0)
        x1 = np.array([-0.05, 0.1])
        assert slater_certificate(twin_problem, shifted, x1).is_strict

    def test_terminal_outside_raises(self, scalar_doc, scalar_problem):
        with pytest.raises(PredictedTerminalOutsideXfError):
            shift_slater(scalar_doc.network, scalar_problem, [0.5], [1.0])
