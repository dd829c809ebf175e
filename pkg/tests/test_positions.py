import numpy as np
import pytest

from fas_aris.channel import assemble_channels
from fas_aris.conic import solve_qp2d
from fas_aris.metrics import aris_power, pairwise_min_distance, received_signal_power
from fas_aris.positions import (build_context, build_qp, distance_cut, g_direct, g_value, ghat_value,
                                grad_g, hess_g, minorant, optimize_positions, power_exact,
                                power_majorant, power_surrogate, update_position)
from fas_aris.scenario import ScenarioConfig

from helpers import operating_points


@pytest.fixture(scope="module")
def points():
    """Operating points with random full-power beams (not necessarily within the ARIS budget)."""
    cfg = ScenarioConfig()
    return cfg, operating_points(cfg, 6)


def _fd_grad(f, t, h):
    return np.array([(f(t + h * u) - f(t - h * u)) / (2 * h) for u in np.eye(2)])


class TestObjective:
    def test_g_tracks_received_power(self, points):
        # g differs from the received signal power by a constant independent of t_n
        cfg, pts = points
        for draw, layout, w, e, rng in pts:
            ctx = build_context(draw, cfg, layout, w, e, 1)
            ts = rng.uniform(-cfg.region_half, cfg.region_half, (5, 2))
            offs = [received_signal_power(assemble_channels(draw, layout.with_position(1, t), cfg), w, e)
                    - g_value(t, ctx) for t in ts]
            np.testing.assert_allclose(offs, offs[0], rtol=0, atol=1e-9 * abs(offs[0]) + 1e-30)

    def test_table_vs_complex(self, points):
        cfg, pts = points
        for draw, layout, w, e, rng in pts:
            ctx = build_context(draw, cfg, layout, w, e, 0)
            for t in rng.uniform(-cfg.region_half, cfg.region_half, (10, 2)):
                assert g_value(t, ctx) == pytest.approx(g_direct(t, ctx), rel=1e-10, abs=1e-10 * ctx.const)

    def test_gradient_and_hessian(self, points):
        cfg, pts = points
        for draw, layout, w, e, rng in pts:
            ctx = build_context(draw, cfg, layout, w, e, 2)
            t = rng.uniform(-cfg.region_half, cfg.region_half, 2)
            gf = _fd_grad(lambda x: g_value(x, ctx), t, 1e-6 * cfg.wavelength)
            np.testing.assert_allclose(grad_g(t, ctx), gf, rtol=1e-5, atol=1e-5 * np.linalg.norm(gf))
            hf = np.column_stack([_fd_grad(lambda x: grad_g(x, ctx)[i], t, 1e-5 * cfg.wavelength)
                                  for i in range(2)])
            np.testing.assert_allclose(hess_g(t, ctx), hf, rtol=1e-4, atol=1e-4 * np.linalg.norm(hf))

    def test_kappa_and_minorant(self, points):
        cfg, pts = points
        for draw, layout, w, e, rng in pts:
            ctx = build_context(draw, cfg, layout, w, e, 3)
            ts = rng.uniform(-cfg.region_half, cfg.region_half, (200, 2))
            lam = max(np.abs(np.linalg.eigvalsh(hess_g(t, ctx))).max() for t in ts)
            assert lam <= ctx.kappa
            gap = [g_value(t, ctx) - minorant(t, ctx) for t in ts]
            assert min(gap) >= -1e-9 * ctx.const
            assert minorant(ctx.t_q, ctx) == pytest.approx(g_value(ctx.t_q, ctx), rel=1e-12)


class TestPowerChain:
    def test_exact_matches_channels(self, points):
        cfg, pts = points
        for draw, layout, w, e, rng in pts:
            ctx = build_context(draw, cfg, layout, w, e, 0)
            t = rng.uniform(-cfg.region_half, cfg.region_half, 2)
            ch = assemble_channels(draw, layout.with_position(0, t), cfg)
            assert power_exact(t, ctx) == pytest.approx(aris_power(ch, w, e, 0.0), rel=1e-10)

    def test_majorants_ordered(self, points):
        cfg, pts = points
        for draw, layout, w, e, rng in pts:
            ctx = build_context(draw, cfg, layout, w, e, 1)
            _, sur = power_surrogate(ctx.t_q, ctx)
            for t in rng.uniform(-cfg.region_half, cfg.region_half, (100, 2)):
                assert power_majorant(t, ctx) >= power_exact(t, ctx) - 1e-9 * cfg.p1
                assert sur(t) >= ghat_value(t, ctx) - 1e-9 * cfg.p1
            assert power_majorant(ctx.t_q, ctx) == pytest.approx(power_exact(ctx.t_q, ctx), abs=1e-10 * cfg.p1)

    def test_distance_cut_is_lower_bound(self, rng):
        for _ in range(50):
            t, t_q, t_v = rng.normal(size=(3, 2))
            assert distance_cut(t, t_q, t_v) <= np.linalg.norm(t - t_v) + 1e-12
        assert distance_cut(t_q, t_q, t_v) == pytest.approx(np.linalg.norm(t_q - t_v))


class TestStep:
    def test_qp_solution_feasible_for_cuts(self, cfg, point):
        draw, state = point
        layout, w, e = state.solution.layout, state.solution.w, state.solution.e
        ctx = build_context(draw, cfg, layout, w, e, 0)
        t = solve_qp2d(build_qp(ctx, layout, cfg))
        others = np.delete(layout.t_bar, 0, axis=0)
        assert np.min(np.linalg.norm(others - t, axis=1)) >= cfg.min_dist * (1 - 1e-9)

    @pytest.mark.parametrize("levels", [0, 8])
    def test_step_never_decreases_g(self, cfg, point, levels):
        draw, state = point
        c = cfg.replace(mm_backtrack_levels=levels)
        sol = state.solution
        for n in range(sol.layout.n):
            ctx = build_context(draw, c, sol.layout, sol.w, sol.e, n)
            step = update_position(n, draw, c, sol.layout, sol.w, sol.e)
            assert g_value(step.t, ctx) >= g_value(ctx.t_q, ctx) - 1e-9 * ctx.const
            if step.accepted:
                ch = assemble_channels(draw, sol.layout.with_position(n, step.t), c)
                assert aris_power(ch, sol.w, sol.e, c.sigma_r2) <= c.p1

    def test_sweeps_monotone_and_feasible(self, cfg, point):
        draw, state = point
        sol = state.solution
        res = optimize_positions(draw, cfg, sol.layout, sol.w, sol.e)
        assert np.all(np.diff(res.rates) >= -1e-9)
        assert np.max(np.abs(res.layout.t_bar)) <= cfg.region_half * (1 + 1e-9)
        assert pairwise_min_distance(res.layout.t_bar)[0] >= cfg.min_dist * (1 - 1e-9)
        ch = assemble_channels(draw, res.layout, cfg)
        assert aris_power(ch, sol.w, sol.e, cfg.sigma_r2) <= cfg.p1
