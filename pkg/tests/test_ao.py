import numpy as np
import pytest

from fas_aris.ao import (AOOptions, equal_power_beam, initial_layout, is_feasible, optimize,
                         run_ao)
from fas_aris.channel import assemble_channels
from fas_aris.errors import PackingError
from fas_aris.metrics import aris_power
from fas_aris.scenario import ScenarioConfig, sample_scenario


class TestInitialization:
    def test_grid_and_equal_power(self, cfg):
        lay = initial_layout(cfg)
        d = np.linalg.norm(lay.t_bar[:, None] - lay.t_bar[None], axis=-1)
        assert d[d > 0].min() == pytest.approx(cfg.wavelength / 2)
        w = equal_power_beam(cfg)
        assert np.vdot(w, w).real == pytest.approx(cfg.p0)
        np.testing.assert_allclose(np.abs(w), np.abs(w[0]))

    def test_reflection_at_ninety_percent(self, cfg, point):
        draw, state = point
        sol = state.solution
        ch = assemble_channels(draw, sol.layout, cfg)
        assert aris_power(ch, sol.w, sol.e, cfg.sigma_r2) == pytest.approx(0.9 * cfg.p1, rel=1e-12)
        np.testing.assert_allclose(np.abs(sol.e), np.abs(sol.e[0]))

    def test_packing_error(self):
        # admissible for the config check, but the half-wavelength grid does not fit
        cfg = ScenarioConfig(n_antennas=16, min_dist=0.05, region_half=0.15)
        with pytest.raises(PackingError):
            initial_layout(cfg)


class TestRun:
    @pytest.mark.parametrize("seed", [8, 13])
    def test_monotone_and_feasible(self, run_cache, seed):
        cfg, draw, state = run_cache("proposed", seed)
        trace = np.array(state.rate_trace)
        assert np.all(np.diff(trace) >= -1e-6)
        assert state.solution.rate_bits == pytest.approx(trace[-1])
        assert is_feasible(state, draw, cfg)
        assert trace[-1] > trace[0]
        assert len(state.wall_time_ms) == state.iter

    def test_deterministic(self, cfg):
        draw = sample_scenario(cfg, 13)
        a, b = optimize(draw, cfg, 13), optimize(draw, cfg, 13)
        assert a.rate_trace == b.rate_trace
        np.testing.assert_array_equal(a.solution.layout.t_bar, b.solution.layout.t_bar)

    def test_without_surface(self):
        cfg = ScenarioConfig(m_elements=0)
        draw = sample_scenario(cfg, 2)
        state = optimize(draw, cfg, 2)
        assert state.converged and is_feasible(state, draw, cfg)
        assert state.solution.e.shape == (0,)

    def test_fixed_blocks_keep_their_variables(self, cfg, point):
        draw, state = point
        e0 = state.solution.e.copy()
        t0 = state.solution.layout.t_bar.copy()
        out = run_ao(draw, cfg, state, AOOptions(move_positions=False, reflect="fixed"))
        np.testing.assert_array_equal(out.solution.e, e0)
        np.testing.assert_array_equal(out.solution.layout.t_bar, t0)
        assert out.converged and out.iter <= 2
