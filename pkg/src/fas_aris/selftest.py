"""Built-in numerical oracle checks.

Each check compares an analytic quantity with an independent computation
(finite differences, brute force, a dual oracle, direct complex arithmetic)
and reports the worst residual against its tolerance.
"""

from __future__ import annotations

import io
import math
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .ao import initialize
from .baselines import passive_element_count
from .beamform import beam_context, solve_beamforming
from .channel import assemble_channels
from .conic import QP2D, solve_qp2d
from .metrics import aris_power, noise_power, received_signal_power
from .positions import (build_context, g_direct, g_value, ghat_value, grad_g, hess_g, minorant,
                        power_exact, power_majorant, power_surrogate)
from .reflect import build_v_matrices, lift, run_reflection
from .scenario import ScenarioConfig, rng_for, sample_scenario

SELFTEST_STREAM = 101


@dataclass
class CheckResult:
    name: str
    passed: bool
    residual: float
    tol: float
    detail: str = ""


@dataclass
class SelfTestReport:
    checks: list[CheckResult]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def format(self) -> str:
        buf = io.StringIO()
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            buf.write(f"{mark}  {c.name:<28s} residual={c.residual:.3e}  tol={c.tol:.1e}"
                      + (f"  {c.detail}" if c.detail else "") + "\n")
        n_ok = sum(c.passed for c in self.checks)
        buf.write(f"{n_ok}/{len(self.checks)} checks passed\n")
        return buf.getvalue()


def _check(name, residual, tol, detail="") -> CheckResult:
    residual = float(residual)
    return CheckResult(name, bool(np.isfinite(residual) and residual <= tol), residual, tol, detail)


def _instances(cfg, count):
    """Random (draw, layout, w, e) operating points with a feasible reflection."""
    out = []
    for seed in range(count):
        draw = sample_scenario(cfg, 1000 + seed)
        state = initialize(draw, cfg, 1000 + seed)
        rng = rng_for(seed, SELFTEST_STREAM)
        sol = state.solution
        w = (rng.standard_normal(cfg.n_antennas) + 1j * rng.standard_normal(cfg.n_antennas))
        w *= math.sqrt(cfg.p0) / np.linalg.norm(w)
        out.append((draw, sol.layout, w, sol.e, rng))
    return out


def _fd_grad(f, t, h):
    g = np.zeros(2)
    for i in range(2):
        d = np.zeros(2)
        d[i] = h
        g[i] = (f(t + d) - f(t - d)) / (2 * h)
    return g


def check_gradient(cfg, insts, perturb: float = 0.0) -> CheckResult:
    worst = 0.0
    for draw, layout, w, e, rng in insts:
        for n in range(layout.n):
            ctx = build_context(draw, cfg, layout, w, e, n)
            t = rng.uniform(-cfg.region_half, cfg.region_half, 2)
            ga = grad_g(t, ctx) * (1 + perturb)
            gf = _fd_grad(lambda x: g_value(x, ctx), t, 1e-6 * cfg.wavelength)
            worst = max(worst, np.linalg.norm(ga - gf) / max(np.linalg.norm(gf), 1e-300))
    return _check("gradient_vs_fd", worst, 1e-5)


def check_hessian(cfg, insts) -> CheckResult:
    worst = 0.0
    for draw, layout, w, e, rng in insts:
        ctx = build_context(draw, cfg, layout, w, e, 0)
        t = rng.uniform(-cfg.region_half, cfg.region_half, 2)
        h = 1e-5 * cfg.wavelength
        hf = np.column_stack([(grad_g(t + h * u, ctx) - grad_g(t - h * u, ctx)) / (2 * h)
                              for u in np.eye(2)])
        ha = hess_g(t, ctx)
        worst = max(worst, np.linalg.norm(ha - hf) / max(np.linalg.norm(hf), 1e-300))
    return _check("hessian_vs_fd", worst, 1e-4)


def check_kappa(cfg, insts, samples: int = 200) -> CheckResult:
    worst = -np.inf
    for draw, layout, w, e, rng in insts:
        ctx = build_context(draw, cfg, layout, w, e, 0)
        ts = rng.uniform(-cfg.region_half, cfg.region_half, (samples, 2))
        lam = max(np.max(np.abs(np.linalg.eigvalsh(hess_g(t, ctx)))) for t in ts)
        worst = max(worst, (lam - ctx.kappa) / ctx.kappa)
    return _check("kappa_bounds_hessian", max(worst, 0.0), 0.0, "max (lambda - kappa)/kappa")


def check_trig_table(cfg, insts) -> CheckResult:
    worst = 0.0
    for draw, layout, w, e, rng in insts:
        ctx = build_context(draw, cfg, layout, w, e, 1 % layout.n)
        for t in rng.uniform(-cfg.region_half, cfg.region_half, (20, 2)):
            a, b = g_value(t, ctx), g_direct(t, ctx)
            worst = max(worst, abs(a - b) / max(abs(b), ctx.const, 1e-300))
    return _check("cosine_table_vs_complex", worst, 1e-10)


def check_minorant(cfg, insts, samples: int = 200) -> CheckResult:
    worst, touch = 0.0, 0.0
    for draw, layout, w, e, rng in insts:
        ctx = build_context(draw, cfg, layout, w, e, 0)
        scale = max(ctx.const, 1e-300)
        for t in rng.uniform(-cfg.region_half, cfg.region_half, (samples, 2)):
            worst = max(worst, (minorant(t, ctx) - g_value(t, ctx)) / scale)
        touch = max(touch, abs(minorant(ctx.t_q, ctx) - g_value(ctx.t_q, ctx)) / scale)
    return _check("minorant_below_objective", max(worst, touch), 1e-9)


def check_power_majorants(cfg, insts, samples: int = 200) -> list[CheckResult]:
    w1, w2, touch = 0.0, 0.0, 0.0
    for draw, layout, w, e, rng in insts:
        ctx = build_context(draw, cfg, layout, w, e, 0)
        scale = cfg.p1
        _, sur = power_surrogate(ctx.t_q, ctx)
        for t in rng.uniform(-cfg.region_half, cfg.region_half, (samples, 2)):
            w1 = max(w1, (power_exact(t, ctx) - power_majorant(t, ctx)) / scale)
            w2 = max(w2, (ghat_value(t, ctx) - sur(t)) / scale)
        touch = max(touch, abs(power_exact(ctx.t_q, ctx) - power_majorant(ctx.t_q, ctx)) / scale,
                    abs(ghat_value(ctx.t_q, ctx) - sur(ctx.t_q)) / scale)
    return [_check("power_quadratic_majorant", w1, 1e-9),
            _check("power_linear_majorant", w2, 1e-9),
            _check("power_majorants_touch", touch, 1e-10)]


def check_power_chain(cfg, insts) -> CheckResult:
    worst = 0.0
    for draw, layout, w, e, rng in insts:
        for n in range(layout.n):
            ctx = build_context(draw, cfg, layout, w, e, n)
            t = rng.uniform(-cfg.region_half, cfg.region_half, 2)
            ch = assemble_channels(draw, layout.with_position(n, t), cfg)
            direct = aris_power(ch, w, e, 0.0)
            worst = max(worst, abs(power_exact(t, ctx) - direct) / max(direct, 1e-300))
    return _check("power_form_vs_channels", worst, 1e-10)


def check_v_matrices(cfg, insts) -> CheckResult:
    worst = 0.0
    for draw, layout, w, e, rng in insts:
        ch = assemble_channels(draw, layout, cfg)
        v, vb, vh, dp = build_v_matrices(ch, w, cfg.sigma_r2, cfg.sigma_u2)
        et = lift(e)
        pairs = [(np.vdot(et, v @ et).real + dp, received_signal_power(ch, w, e)),
                 (np.vdot(et, vb @ et).real, noise_power(ch, e, cfg.sigma_r2, cfg.sigma_u2)),
                 (np.vdot(et, vh @ et).real, aris_power(ch, w, e, cfg.sigma_r2))]
        for a, b in pairs:
            worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    return _check("lifted_forms_identities", worst, 1e-10)


def beam_dual_oracle(varpi, b_mat, p0, p1):
    """Optimal ``max |varpi w|^2`` s.t. ``|w|^2 <= p0``, ``w^H B w <= p1`` via its 1-D dual.

    For rank-one objectives the S-procedure dual is
    ``min_{theta in [0, 1]} varpi ((1-theta) I + theta B)^(-1) varpi^H ((1-theta) p0 + theta p1)``.
    """
    n = len(varpi)

    def dual(theta):
        m = (1 - theta) * np.eye(n) + theta * b_mat
        return float(np.real(varpi @ np.linalg.solve(m, varpi.conj()))) * ((1 - theta) * p0 + theta * p1)

    grid = np.linspace(0.0, 1.0 - 1e-9, 401)
    vals = [dual(th) for th in grid]
    k = int(np.argmin(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(dual, bounds=(lo, hi), method="bounded", options={"xatol": 1e-14})
    return min(res.fun, vals[k])


def check_beam_tightness(cfg, insts) -> list[CheckResult]:
    tight, cons, dual_gap = 0.0, 0.0, 0.0
    for draw, layout, w, e, rng in insts:
        ch = assemble_channels(draw, layout, cfg)
        ctx = beam_context(ch, e * 0.7, cfg)
        res = solve_beamforming(ctx)
        val = abs(ctx.varpi @ res.w) ** 2
        tight = max(tight, abs(val - res.relaxed_value) / res.relaxed_value)
        cons = max(cons, np.vdot(res.w, res.w).real / ctx.p0 - 1,
                   np.vdot(res.w, ctx.b_matrix @ res.w).real / ctx.p1_effective - 1)
        ref = beam_dual_oracle(ctx.varpi, ctx.b_matrix, ctx.p0, ctx.p1_effective)
        dual_gap = max(dual_gap, abs(val - ref) / ref)
    return [_check("beam_rank_one_tightness", tight, 1e-8),
            _check("beam_trace_constraints", max(cons, 0.0), 1e-12),
            _check("beam_vs_dual_oracle", dual_gap, 1e-8)]


def check_reflect_grid(cfg, seeds: int = 3, grid: int = 400) -> CheckResult:
    """M = 1: the reflection optimizer against brute force over (beta, theta)."""
    c1 = cfg.replace(m_elements=1)
    worst = 0.0
    for s in range(seeds):
        draw = sample_scenario(c1, 2000 + s)
        st = initialize(draw, c1, 2000 + s)
        ch = assemble_channels(draw, st.solution.layout, c1)
        w = solve_beamforming(beam_context(ch, st.solution.e, c1)).w
        rate = run_reflection(ch, w, c1, st.solution.e).rate
        a = complex(ch.h_ru[0] * (ch.h_br[0] @ w))
        b = complex(ch.h_bu @ w)
        beta_max = math.sqrt(c1.p1 / (abs(ch.h_br[0] @ w) ** 2 + c1.sigma_r2))
        beta = np.linspace(0.0, beta_max, grid)[:, None]
        theta = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)[None, :]
        sig = np.abs(a * beta * np.exp(1j * theta) + b) ** 2
        noise = c1.sigma_r2 * abs(ch.h_ru[0]) ** 2 * beta ** 2 + c1.sigma_u2
        brute = float(np.log2(1 + sig / noise).max())
        worst = max(worst, brute - rate)
    return _check("reflect_m1_vs_grid", max(worst, 0.0), 1e-3)


def check_qp2d(samples: int = 40) -> CheckResult:
    rng = rng_for(0, SELFTEST_STREAM + 1)
    g = np.linspace(-1, 1, 401)
    X, Y = np.meshgrid(g, g)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    worst = 0.0
    for k in range(samples):
        b = 2 * rng.standard_normal(2)
        A = rng.standard_normal((2, 2))
        c = 0.3 * rng.standard_normal(2) + 0.3
        ball = (0.3 * rng.standard_normal(2), rng.uniform(0.3, 1.0)) if k % 2 else None
        q = QP2D(-np.eye(2), b, A, c, box=((-1, -1), (1, 1)), ball=ball)
        feas = np.all(pts @ A.T - c <= 0, axis=1)
        if ball is not None:
            feas &= np.linalg.norm(pts - ball[0], axis=1) <= ball[1]
        if not feas.any():
            continue
        x = solve_qp2d(q)
        brute = float(np.max(-0.5 * np.sum(pts[feas] ** 2, axis=1) + pts[feas] @ b))
        worst = max(worst, brute - q.objective(x))
    return _check("qp2d_vs_grid", max(worst, 0.0), 1e-12)


def check_passive_count(cfg) -> CheckResult:
    pc, pdc, p1 = (10 ** (x / 10) for x in (cfg.passive_pc_dbm, cfg.passive_pdc_dbm, cfg.p1_dbm))
    expected = math.floor((p1 + cfg.m_elements * (pc + pdc)) / pc)
    return _check("passive_element_count", abs(passive_element_count(cfg) - expected), 0.0,
                  f"count={passive_element_count(cfg)}")


def check_csv_roundtrip() -> CheckResult:
    from .bench import ResultRow, read_rows_csv, write_rows_csv

    rng = rng_for(0, SELFTEST_STREAM + 2)
    rows = [ResultRow(float(rng.normal()), "proposed", i, i, float(rng.normal()) * 1e3, i, float(rng.random()),
                      bool(i % 2)) for i in range(20)]
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "rows.csv"
        write_rows_csv(rows, path)
        back = read_rows_csv(path)
    return _check("csv_roundtrip", 0.0 if back == rows else 1.0, 0.0)


def selftest(cfg: ScenarioConfig | None = None, *, instances: int = 4,
             perturb_gradient: float = 0.0) -> SelfTestReport:
    """Run every oracle check; ``perturb_gradient`` scales the analytic gradient
    by ``1 + perturb_gradient`` inside the gradient check (negative control)."""
    cfg = cfg or ScenarioConfig()
    insts = _instances(cfg, instances)
    checks = [check_gradient(cfg, insts, perturb_gradient), check_hessian(cfg, insts),
              check_kappa(cfg, insts), check_trig_table(cfg, insts), check_minorant(cfg, insts)]
    checks += check_power_majorants(cfg, insts)
    checks += [check_power_chain(cfg, insts), check_v_matrices(cfg, insts)]
    checks += check_beam_tightness(cfg, insts)
    checks += [check_reflect_grid(cfg), check_qp2d(), check_passive_count(cfg), check_csv_roundtrip()]
    return SelfTestReport(checks)
