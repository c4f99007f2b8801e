"""End-to-end properties over seeded random certified instances."""

from functools import lru_cache

import numpy as np
import pytest

from hdmpc import assemble_aggregate
from hdmpc.condense import (
    condense,
    eval_constraints,
    eval_cost,
    rollout_constraints,
    rollout_cost,
)
from hdmpc.config_manager import SolverOptions
from hdmpc.harness import message_stats
from hdmpc.inner_jacobi import box_qp_argmin, solve_lagrangian
from hdmpc.instance import load_config
from hdmpc.mpc_loop import (
    LoopContext,
    check_cost_decrease,
    initial_state,
    simulate,
    solve_at_state,
)
from hdmpc.oracle import (
    dual_function_exact,
    lagrangian_value,
    solve_box_qp_exact,
    solve_constrained_qp_exact,
)
from hdmpc.outer_subgrad import check_bounds

from .conftest import FIXTURES_DIR, random_instance

pytestmark = [pytest.mark.slow, pytest.mark.acceptance]

SEEDS = range(50)
# recorded outer iterates re-checked against the exact oracles per instance
SAMPLED_ITERATES = 12


def _first_step(seed, options=None):
    network, x0, u_bar = random_instance(seed)
    ctx = LoopContext.build(network, options)
    return ctx, solve_at_state(initial_state(ctx, x0, u_bar), ctx)


@lru_cache(maxsize=None)
def _recorded_step(seed):
    return _first_step(seed, SolverOptions(record_history=True))


def _sampled(history):
    stride = max(1, len(history) // SAMPLED_ITERATES)
    picked = list(range(0, len(history), stride))
    if picked[-1] != len(history) - 1:
        picked.append(len(history) - 1)
    return picked


class TestInstanceFamily:
    """The seeded family covers vector subsystems and input coupling."""

    def test_shapes_and_coupling(self):
        vector_blocks = 0
        input_coupled = 0
        for seed in SEEDS:
            network, _, _ = random_instance(seed)
            for s in network.subsystems:
                vector_blocks += s.n > 1 or s.m > 1
                input_coupled += any(j != s.index for j in s.B_blocks)
        assert vector_blocks > 0
        assert input_coupled > 0


class TestFirstStep:
    """One MPC step on each random instance."""

    @pytest.mark.parametrize("seed", SEEDS)
    def test_averaged_input_is_strictly_feasible(self, seed):
        _, outcome = _recorded_step(seed)
        assert outcome.solution.feasible
        assert outcome.solution.max_constraint < 0.0
        assert outcome.solution.k_used == outcome.params.k_bar

    @pytest.mark.parametrize("seed", SEEDS)
    def test_cost_within_budget_of_tightened_optimum(self, seed):
        _, outcome = _recorded_step(seed)
        params = outcome.params
        _, f_tight = solve_constrained_qp_exact(outcome.tightened)
        gap = params.alpha_t * params.Lp_t ** 2 / 2.0 + params.eps_t
        assert outcome.solution.f_value <= f_tight + gap + 1e-9

    @pytest.mark.parametrize("seed", SEEDS)
    def test_iterate_bounds(self, seed):
        _, outcome = _recorded_step(seed)
        tight = outcome.tightened
        _, f_tight = solve_constrained_qp_exact(tight)
        f_bar = eval_cost(tight.base, tight.slater.u_bar, tight.x_t)
        report = check_bounds(outcome.solution.history, outcome.params, f_tight, f_bar)
        assert report.checked == outcome.params.k_bar

    @pytest.mark.parametrize("seed", range(10))
    def test_harness_matches_monolith(self, seed):
        _, mono = _first_step(seed)
        _, dist = _first_step(seed, SolverOptions(distributed=True))
        np.testing.assert_allclose(dist.solution.u_hat, mono.solution.u_hat, rtol=0, atol=1e-12)
        stats = message_stats(dist.log)
        assert stats.outer_iterations == dist.params.k_bar


class TestInnerSolves:
    """Each inner Lagrangian solve, replayed from the recorded run."""

    @pytest.mark.parametrize("seed", SEEDS)
    def test_contraction_and_suboptimality(self, seed):
        ctx, outcome = _recorded_step(seed)
        tight, params = outcome.tightened, outcome.params
        p, x = tight.base, tight.x_t
        history = outcome.solution.history
        blocks = list(p.blocks.values())
        for idx in _sampled(history):
            it = history[idx]
            warm = history[idx - 1].u if idx else None
            iterates = []
            result = solve_lagrangian(
                ctx.partition, x, it.mu, params.eps_t, ctx.cert, warm_start=warm,
                sweep_callback=lambda _, u: iterates.append(u.copy()),
            )
            np.testing.assert_array_equal(result.u, it.u)
            assert result.sweeps == it.inner_sweeps

            linear = p.G @ x + p.Theta.T @ it.mu
            u_star, _ = solve_box_qp_exact(p.H, linear, p.box_lo, p.box_hi)
            initial = max(np.linalg.norm(iterates[0][s] - u_star[s]) for s in blocks)
            for k, u in enumerate(iterates):
                rate = ctx.cert.phi ** k * initial
                block_max = max(np.linalg.norm(u[s] - u_star[s]) for s in blocks)
                assert block_max <= rate + 1e-9
                assert np.linalg.norm(u - u_star) <= ctx.cert.M * rate + 1e-9

            q = dual_function_exact(tight, it.mu)
            tol = 1e-9 * (1.0 + abs(q))
            gap = lagrangian_value(tight, it.u, it.mu) - q
            assert -tol <= gap <= params.eps_t + tol

    @pytest.mark.parametrize("seed", range(20))
    def test_local_solvers_agree(self, seed):
        """Face enumeration and the active-set method give the same block minimizer."""
        ctx, outcome = _recorded_step(seed)
        rng = np.random.default_rng(500 + seed)
        for blk in ctx.partition.blocks:
            for _ in range(20):
                linear = rng.normal(scale=3.0, size=blk.size)
                enumerated = box_qp_argmin(blk.H_ii, linear, blk.lo, blk.hi, face_cap=blk.size)
                active_set = box_qp_argmin(blk.H_ii, linear, blk.lo, blk.hi, face_cap=0)
                np.testing.assert_allclose(active_set, enumerated, rtol=0, atol=1e-10)


class TestDualSubgradients:
    """Each recorded constraint value is a delta-subgradient of the dual."""

    @pytest.mark.parametrize("seed", SEEDS)
    def test_delta_subgradient_inequality(self, seed):
        _, outcome = _recorded_step(seed)
        tight, eps = outcome.tightened, outcome.params.eps_t
        history = outcome.solution.history
        rng = np.random.default_rng(seed)
        for idx in _sampled(history):
            it = history[idx]
            q_k = dual_function_exact(tight, it.mu)
            for mu in (np.zeros_like(it.mu), *rng.exponential(size=(4, it.mu.size))):
                q = dual_function_exact(tight, mu)
                bound = q_k + eps + float((mu - it.mu) @ it.d)
                assert q <= bound + 1e-9 * (1.0 + abs(q))


class TestCondensation:
    """Dense evaluation agrees with simulating the dynamics."""

    @pytest.mark.parametrize("seed", SEEDS)
    def test_matches_rollout(self, seed):
        network, _, _ = random_instance(seed)
        p = condense(network)
        rng = np.random.default_rng(1000 + seed)
        for _ in range(100):
            u = rng.uniform(p.box_lo, p.box_hi)
            x = rng.uniform(-2.0, 2.0, size=p.n_x)
            seq = p.to_time_major(u)
            f = eval_cost(p, u, x)
            assert abs(f - rollout_cost(network, x, seq)) <= 1e-10 * (1.0 + abs(f))
            np.testing.assert_allclose(
                eval_constraints(p, u, x), rollout_constraints(network, x, seq), rtol=0, atol=1e-10
            )


@pytest.fixture(scope="module", params=["twin.json", "stable_scalar.json"])
def closed_loop(request):
    doc = load_config(FIXTURES_DIR / request.param)
    trace = simulate(doc.network, doc.x0, doc.u_bar0, steps=10, delta0=doc.delta0)
    return doc, trace


class TestClosedLoop:
    """Ten-step runs on the shipped fixtures that pass certification."""

    def test_cost_strictly_decreases(self, closed_loop):
        _, trace = closed_loop
        assert len(trace) >= 2
        assert all(r.lyapunov_ok for r in trace)
        assert check_cost_decrease(trace).min_margin > 0.0

    def test_first_input_drives_plant(self, closed_loop):
        doc, trace = closed_loop
        model = assemble_aggregate(doc.network)
        for prev, cur in zip(trace, trace[1:]):
            expected = model.A @ prev.x + model.B @ prev.u_applied
            np.testing.assert_array_equal(cur.x, expected)

    def test_states_stay_in_X(self, closed_loop):
        doc, trace = closed_loop
        for record in trace:
            assert doc.network.X.contains(record.x)

    def test_norm_bound_covers_box(self, closed_loop):
        doc, trace = closed_loop
        p = condense(doc.network)
        rng = np.random.default_rng(5)
        for record in trace:
            for _ in range(200):
                u = rng.uniform(p.box_lo, p.box_hi)
                assert np.linalg.norm(eval_constraints(p, u, record.x)) <= record.L_t + 1e-12
