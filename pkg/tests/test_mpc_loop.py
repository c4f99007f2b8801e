"""Tests for the closed-loop driver."""

import math
from dataclasses import replace

import numpy as np
import pytest

from hdmpc import mpc_loop
from hdmpc.config_manager import SolverOptions
from hdmpc.error_handler import (
    EXIT_RUNTIME_ASSUMPTION,
    AssumptionFourViolatedError,
    ConvergedToOrigin,
    LyapunovViolationError,
    ShiftedSlaterViolatedError,
    SlaterViolatedError,
    ValidationError,
    exit_code_for,
)
from hdmpc.harness import message_stats
from hdmpc.mpc_loop import (
    LoopContext,
    TraceRecord,
    check_cost_decrease,
    initial_state,
    mpc_step,
    simulate,
    solve_at_state,
)
from hdmpc.tighten import slater_certificate

from .conftest import box_network, scalar_subsystem


@pytest.fixture
def stable_network():
    """x+ = 0.5x + u, P = 3, K = -0.5: the optimal input is -3x/8."""
    return box_network([scalar_subsystem(0, {0: 0.5}, {0: 1.0}, P=3.0, K=-0.5)], N=1)


@pytest.fixture
def stable_ctx(stable_network):
    return LoopContext.build(stable_network)


class TestInitialState:
    """Tests for initial_state."""

    def test_defaults(self, stable_ctx):
        state = initial_state(stable_ctx, [1.0], [-0.5])
        assert state.t == 0
        assert state.delta0 == pytest.approx(0.5)
        assert state.L == pytest.approx(math.sqrt(5.0))
        assert state.f_prev is None
        assert state.slater.min_margin == pytest.approx(0.5)

    def test_explicit_delta(self, stable_ctx):
        assert initial_state(stable_ctx, [1.0], [-0.5], delta0=0.2).delta0 == 0.2

    @pytest.mark.parametrize("x0", [[3.0], [1.0, 1.0]])
    def test_bad_state(self, stable_ctx, x0):
        with pytest.raises(ValidationError):
            initial_state(stable_ctx, x0, [-0.5])

    def test_slater_not_strict(self, stable_ctx):
        # u = 0.5 puts x1 = 1 outside Xf
        with pytest.raises(SlaterViolatedError):
            initial_state(stable_ctx, [1.0], [0.5])

    def test_non_positive_delta(self, stable_ctx):
        with pytest.raises(ValidationError):
            initial_state(stable_ctx, [1.0], [-0.5], delta0=0.0)


class TestSolveAtState:
    """Tests for solve_at_state."""

    def test_origin(self, stable_ctx):
        state = replace(initial_state(stable_ctx, [1.0], [-0.5]), x=np.zeros(1))
        with pytest.raises(ConvergedToOrigin):
            solve_at_state(state, stable_ctx)

    def test_cost_decrease_assumption(self, stable_ctx):
        state = replace(initial_state(stable_ctx, [1.0], [-0.5]), f_prev=0.0)
        with pytest.raises(AssumptionFourViolatedError):
            solve_at_state(state, stable_ctx)

    def test_optimal_input(self, stable_ctx):
        outcome = solve_at_state(initial_state(stable_ctx, [1.0], [-0.5]), stable_ctx)
        assert outcome.delta_t == pytest.approx(0.5)
        assert outcome.f_slater == pytest.approx(1.25)
        assert outcome.solution.u_hat == pytest.approx([-0.375])
        assert outcome.solution.f_value == pytest.approx(1.1875)
        assert outcome.log is None

    def test_distributed_matches_monolith(self, stable_network):
        mono_ctx = LoopContext.build(stable_network)
        dist_ctx = LoopContext.build(stable_network, SolverOptions(distributed=True))
        mono = solve_at_state(initial_state(mono_ctx, [1.0], [-0.5]), mono_ctx)
        dist = solve_at_state(initial_state(dist_ctx, [1.0], [-0.5]), dist_ctx)
        np.testing.assert_array_equal(dist.solution.u_hat, mono.solution.u_hat)
        assert dist.log is not None
        stats = message_stats(dist.log)
        assert stats.counts["LocalUpdate"] == 0
        assert stats.outer_iterations == dist.params.k_bar


class TestMpcStep:
    """Tests for mpc_step."""

    def test_advances_plant(self, stable_ctx):
        state = initial_state(stable_ctx, [1.0], [-0.5])
        next_state, record = mpc_step(state, stable_ctx)
        assert next_state.t == 1
        assert next_state.x == pytest.approx([0.125])
        assert next_state.f_prev == record.f_value
        assert next_state.slater.u_bar == pytest.approx([-0.0625])
        assert record.u_applied == pytest.approx([-0.375])
        assert record.lyapunov_ok
        assert record.message_counts is None

    def test_second_step_budget(self, stable_ctx):
        state, _ = mpc_step(initial_state(stable_ctx, [1.0], [-0.5]), stable_ctx)
        _, record = mpc_step(state, stable_ctx)
        assert record.delta_t == pytest.approx(1.140625)
        assert record.f_value < state.f_prev

    def test_shifted_slater_strict_at_next_state(self, twin_doc):
        ctx = LoopContext.build(twin_doc.network)
        state = initial_state(ctx, twin_doc.x0, twin_doc.u_bar0, twin_doc.delta0)
        for _ in range(2):
            state, _ = mpc_step(state, ctx)
            again = slater_certificate(ctx.problem, state.slater.u_bar, state.x)
            assert state.slater.is_strict
            assert again.min_margin == state.slater.min_margin > 0.0

    def test_shifted_slater_violation(self, stable_ctx, monkeypatch):
        monkeypatch.setattr(mpc_loop, "shift_slater", lambda *args: np.array([5.0]))
        with pytest.raises(ShiftedSlaterViolatedError) as exc_info:
            mpc_step(initial_state(stable_ctx, [1.0], [-0.5]), stable_ctx)
        assert exc_info.value.step == 0
        assert exc_info.value.min_margin < 0.0
        assert exit_code_for(exc_info.value) == EXIT_RUNTIME_ASSUMPTION


class TestSimulate:
    """Tests for simulate."""

    def test_three_steps(self, stable_network):
        trace = simulate(stable_network, [1.0], [-0.5], steps=3)
        assert [r.t for r in trace] == [0, 1, 2]
        assert trace[0].f_value == pytest.approx(1.1875)
        assert trace[1].x == pytest.approx([0.125])
        assert all(r.lyapunov_ok for r in trace)

    def test_cost_decrease_report(self, stable_network):
        trace = simulate(stable_network, [1.0], [-0.5], steps=3)
        report = check_cost_decrease(trace)
        assert len(report.margins) == 2
        assert report.min_margin > 0.0
        for slack in report.budget_slack:
            assert slack == pytest.approx(0.0, abs=1e-12)

    def test_stops_at_origin(self, stable_network):
        trace = simulate(stable_network, [1.0], [-0.5], steps=40)
        assert 2 < len(trace) < 40
        assert abs(float(trace[-1].x[0])) < 1e-4

    @pytest.mark.parametrize("fixture", ["stable_network", "twin_doc"])
    def test_states_stay_in_X(self, fixture, request):
        if fixture == "twin_doc":
            doc = request.getfixturevalue(fixture)
            network, x0, u_bar0, delta0 = doc.network, doc.x0, doc.u_bar0, doc.delta0
        else:
            network, x0, u_bar0, delta0 = request.getfixturevalue(fixture), [1.0], [-0.5], None
        trace = simulate(network, x0, u_bar0, steps=8, delta0=delta0)
        assert trace
        for record in trace:
            assert network.X.contains(record.x)

    def test_sink_sees_every_record(self, stable_network):
        seen = []
        trace = simulate(stable_network, [1.0], [-0.5], steps=2, sink=seen.append)
        assert seen == trace

    def test_zero_steps(self, stable_network):
        assert simulate(stable_network, [1.0], [-0.5], steps=0) == []

    def test_negative_steps(self, stable_network):
        with pytest.raises(ValidationError):
            simulate(stable_network, [1.0], [-0.5], steps=-1)

    def test_thread_pool_gives_same_trace(self, stable_network):
        serial = simulate(stable_network, [1.0], [-0.5], steps=2)
        threaded = simulate(
            stable_network, [1.0], [-0.5], steps=2,
            options=SolverOptions(single_thread=False, max_workers=2),
        )
        assert [r.f_value for r in threaded] == [r.f_value for r in serial]

    def test_distributed_records_message_counts(self, stable_network):
        trace = simulate(
            stable_network, [1.0], [-0.5], steps=2, options=SolverOptions(distributed=True)
        )
        assert trace[0].message_counts["ParamAnnounce"] == 1
        assert trace[0].message_counts["Ack"] == 1

    def test_assumption_violated_on_scalar(self, scalar_doc):
        with pytest.raises(AssumptionFourViolatedError) as exc_info:
            simulate(scalar_doc.network, scalar_doc.x0, scalar_doc.u_bar0, steps=3)
        assert exc_info.value.step == 1


class TestCheckCostDecrease:
    """Tests for check_cost_decrease."""

    def test_needs_two_records(self):
        with pytest.raises(ValidationError):
            check_cost_decrease([TraceRecord(t=0, f_value=1.0)])

    def test_increase_detected(self):
        trace = [TraceRecord(t=0, f_value=1.0), TraceRecord(t=1, f_value=1.0)]
        with pytest.raises(LyapunovViolationError) as exc_info:
            check_cost_decrease(trace)
        assert exc_info.value.step == 1

    def test_margins(self):
        trace = [TraceRecord(t=t, f_value=f) for t, f in enumerate([3.0, 2.0, 1.5])]
        assert check_cost_decrease(trace).margins == (1.0, 0.5)


class TestTraceRecord:
    """Tests for TraceRecord serialization."""

    def test_dict_round_trip(self):
        record = TraceRecord(
            t=2,
            f_value=0.5,
            x=np.array([0.1, -0.2]),
            u_applied=np.array([0.3]),
            k_bar=10,
            message_counts={"Ack": 2},
        )
        restored = TraceRecord.from_dict(record.to_dict())
        assert restored.t == 2
        assert restored.k_bar == 10
        np.testing.assert_array_equal(restored.x, record.x)
        assert restored.message_counts == {"Ack": 2}

    def test_counts_omitted_when_absent(self):
        assert "message_counts" not in TraceRecord(t=0, f_value=1.0).to_dict()
