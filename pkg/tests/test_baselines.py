import math

import numpy as np
import pytest

from fas_aris.baselines import KINDS, eas_pool, passive_element_count, run_baseline
from fas_aris.errors import ConfigError
from fas_aris.scenario import ScenarioConfig, sample_scenario

SMALL = ScenarioConfig(n_antennas=2, m_elements=2)


class TestPassiveCount:
    def test_default_parameters(self, cfg):
        # 10 mW + 4 (0.1 mW + 0.316 mW) = 11.665 mW at 0.1 mW per element
        assert passive_element_count(cfg) == 116

    @pytest.mark.parametrize("changes, expected", [({"m_elements": 0}, 100),
                                                    ({"m_elements": 0, "p1_dbm": -10.0}, 1),
                                                    ({"m_elements": 8}, 133)])
    def test_other_parameters(self, changes, expected):
        cfg = ScenarioConfig(**changes)
        mw = lambda dbm: 10 ** (dbm / 10)
        direct = (mw(cfg.p1_dbm) + cfg.m_elements * (mw(cfg.passive_pc_dbm) + mw(cfg.passive_pdc_dbm))) \
            / mw(cfg.passive_pc_dbm)
        assert passive_element_count(cfg) == expected == math.floor(direct + 1e-9)


class TestPool:
    def test_pool_contains_grid_and_is_spaced(self, cfg):
        pool = eas_pool(cfg)
        assert pool.shape == (2 * cfg.n_antennas, 2)
        d = np.linalg.norm(pool[:, None] - pool[None], axis=-1)
        assert d[d > 0].min() >= cfg.min_dist * (1 - 1e-12)
        assert len({tuple(np.round(p, 12)) for p in pool}) == len(pool)


class TestRunners:
    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            run_baseline("nope", sample_scenario(SMALL, 0), SMALL)

    def test_eas_enumerates_all_subsets(self):
        draw = sample_scenario(SMALL, 1)
        eas = run_baseline("eas", draw, SMALL)
        fpa = run_baseline("fpa", draw, SMALL)
        assert eas.subsets == math.comb(4, 2)
        # the FPA grid is one of the candidate subsets
        assert eas.solution.rate_bits >= fpa.solution.rate_bits - 1e-6
        assert eas.feasible and fpa.feasible

    @pytest.mark.parametrize("kind", KINDS)
    def test_deterministic_and_feasible(self, kind):
        draw = sample_scenario(SMALL, 3)
        a, b = run_baseline(kind, draw, SMALL), run_baseline(kind, draw, SMALL)
        assert a.solution.rate_bits == b.solution.rate_bits
        assert a.feasible
        assert np.all(np.diff(a.state.rate_trace) >= -1e-6)

    def test_fpa_does_not_move(self):
        draw = sample_scenario(SMALL, 2)
        res = run_baseline("fpa", draw, SMALL)
        np.testing.assert_array_equal(res.solution.layout.t_bar, eas_pool(SMALL)[:2])

    def test_passive_is_unit_modulus(self):
        draw = sample_scenario(SMALL, 4)
        res = run_baseline("passive", draw, SMALL)
        assert res.meta["m_passive"] == passive_element_count(SMALL) == len(res.solution.e)
        np.testing.assert_allclose(np.abs(res.solution.e), 1.0, atol=1e-6)

    def test_random_phase_keeps_phases(self):
        draw = sample_scenario(SMALL, 5)
        res = run_baseline("random_phase", draw, SMALL)
        first = run_baseline("random_phase", draw, SMALL, seed=5).solution.e
        np.testing.assert_array_equal(res.solution.e, first)
        np.testing.assert_allclose(np.abs(res.solution.e), np.abs(res.solution.e[0]))
