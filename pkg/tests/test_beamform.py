import numpy as np
import pytest

from fas_aris.ao import equal_power_beam
from fas_aris.beamform import (BeamContext, build_beam_sdp, optimize_beamforming,
                               reconstruct_rank_one, solve_beamforming)
from fas_aris.channel import assemble_channels
from fas_aris.errors import ArisBudgetExhausted
from fas_aris.metrics import achievable_rate
from fas_aris.selftest import beam_dual_oracle

from helpers import beam_instances


class TestReconstruction:
    def test_keeps_objective_and_is_dominated(self, rng):
        n = 4
        varpi = rng.normal(size=n) + 1j * rng.normal(size=n)
        g = rng.normal(size=(n, 3)) + 1j * rng.normal(size=(n, 3))
        W = g @ g.conj().T
        w = reconstruct_rank_one(W, varpi)
        assert abs(varpi @ w) ** 2 == pytest.approx(np.real(varpi @ W @ varpi.conj()), rel=1e-12)
        assert np.linalg.eigvalsh(W - np.outer(w, w.conj()))[0] >= -1e-10 * np.abs(W).max()

    def test_identity_example(self):
        w = reconstruct_rank_one(np.eye(2, dtype=complex), np.array([1.0, 0.0], complex))
        np.testing.assert_allclose(w, [1.0, 0.0])

    def test_rank_one_input_is_kept(self, rng):
        v = rng.normal(size=3) + 1j * rng.normal(size=3)
        varpi = rng.normal(size=3) + 1j * rng.normal(size=3)
        w = reconstruct_rank_one(np.outer(v, v.conj()), varpi)
        np.testing.assert_allclose(np.outer(w, w.conj()), np.outer(v, v.conj()), atol=1e-12)

    def test_degenerate(self):
        assert not np.any(reconstruct_rank_one(np.zeros((2, 2)), np.ones(2)))


class TestSolve:
    def test_against_dual_oracle(self, cfg):
        insts = beam_instances(cfg, 30)
        for ctx in insts:
            res = solve_beamforming(ctx)
            val = abs(ctx.varpi @ res.w) ** 2
            ref = beam_dual_oracle(ctx.varpi, ctx.b_matrix, ctx.p0, ctx.p1_effective)
            assert val == pytest.approx(ref, rel=1e-8)
            assert val == pytest.approx(res.relaxed_value, rel=1e-8)
            # the relaxation dominates the rank-one vector in the PSD order
            diff = res.w_hat - np.outer(res.w, res.w.conj())
            assert np.linalg.eigvalsh(diff)[0] >= -1e-9 * np.trace(res.w_hat).real

    def test_without_aris_budget_is_mrt(self, cfg, point):
        draw, state = point
        ch = assemble_channels(draw, state.solution.layout, cfg)
        e = state.solution.e
        w = optimize_beamforming(ch, e, cfg, aris_budget=False)
        varpi = (ch.h_ru * e) @ ch.h_br + ch.h_bu
        assert abs(varpi @ w) ** 2 == pytest.approx(cfg.p0 * np.linalg.norm(varpi) ** 2, rel=1e-8)

    def test_single_antenna_closed_form(self):
        ctx = BeamContext(np.array([2.0 + 1j]), np.array([[4.0 + 0j]]), 1.0, 2.0)
        res = solve_beamforming(ctx)
        # |w|^2 = min(P0, P1_eff / b) = 0.5
        assert abs(res.w[0]) ** 2 == pytest.approx(0.5, rel=1e-8)

    def test_phase_invariance_and_dominance(self, cfg, point):
        draw, state = point
        ch = assemble_channels(draw, state.solution.layout, cfg)
        e = state.solution.e
        w = optimize_beamforming(ch, e, cfg)
        r = achievable_rate(ch, w, e, cfg.sigma_r2, cfg.sigma_u2)
        assert achievable_rate(ch, np.exp(0.7j) * w, e, cfg.sigma_r2, cfg.sigma_u2) == pytest.approx(r, abs=1e-12)
        assert r >= achievable_rate(ch, equal_power_beam(cfg), e, cfg.sigma_r2, cfg.sigma_u2)

    def test_budget_exhausted(self, cfg):
        ctx = BeamContext(np.ones(2, complex), np.eye(2), 1.0, -1.0)
        with pytest.raises(ArisBudgetExhausted):
            build_beam_sdp(ctx)

    def test_zero_channel(self):
        res = solve_beamforming(BeamContext(np.zeros(3, complex), np.eye(3), 1.0, 1.0))
        assert not np.any(res.w) and res.relaxed_value == 0.0
