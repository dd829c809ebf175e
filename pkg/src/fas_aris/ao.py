"""Alternating optimization over beamformer, antenna positions and reflection.

Every block update holds the other two fixed and its feasible set contains
the current iterate, so an accepted step never lowers the rate. A block
whose solver fails, or whose result would lower the rate, is replaced by the
identity step and flagged in ``stall_flags``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .beamform import beam_context, solve_beamforming
from .channel import AntennaLayout, assemble_channels, default_layout
from .errors import FasArisError, PackingError
from .metrics import Solution, achievable_rate, check_feasibility, pairwise_min_distance
from .positions import optimize_positions
from .reflect import align_passive_phases, run_reflection
from .scenario import STREAM_ARIS_INIT, ScenarioConfig, ScenarioDraw, rng_for

# a block result is kept unless it lowers the rate by more than this (rounding only)
ACCEPT_SLACK = 1e-9
BLOCKS = ("beamform", "positions", "reflect")


@dataclass
class AOState:
    solution: Solution
    iter: int = 0
    rate_trace: list[float] = field(default_factory=list)
    stall_flags: dict[str, bool] = field(default_factory=lambda: dict.fromkeys(BLOCKS, False))
    wall_time_ms: list[float] = field(default_factory=list)
    converged: bool = False
    messages: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class AOOptions:
    """Which blocks move and which constraint set applies."""

    move_positions: bool = True
    reflect: str = "active"  # active | passive | fixed
    aris_budget: bool = True
    sigma_r2: float | None = None


def equal_power_beam(cfg: ScenarioConfig, n: int | None = None) -> np.ndarray:
    n = cfg.n_antennas if n is None else n
    return np.full(n, np.sqrt(cfg.p0 / n), dtype=complex)


def initial_layout(cfg: ScenarioConfig, m: int | None = None) -> AntennaLayout:
    layout = default_layout(cfg, m=m)
    if layout.n and np.max(np.abs(layout.t_bar)) > cfg.region_half * (1 + 1e-12):
        raise PackingError(
            f"{cfg.n_antennas} antennas at spacing {max(cfg.wavelength / 2, cfg.min_dist):g} m "
            f"do not fit in the region of half-width {cfg.region_half:g} m")
    dmin, _ = pairwise_min_distance(layout.t_bar)
    if dmin < cfg.min_dist * (1 - 1e-12):
        raise PackingError("initial grid violates the minimum distance")
    return layout


def scaled_reflection(ch, w, phases, cfg: ScenarioConfig, fraction: float,
                      sigma_r2: float | None = None) -> np.ndarray:
    """Common amplitude with ``aris_power(w, beta e^{j theta}) = fraction * P1``."""
    sigma_r2 = cfg.sigma_r2 if sigma_r2 is None else sigma_r2
    unit = np.exp(1j * np.asarray(phases, dtype=float))
    per_beta2 = float(np.sum(np.abs(ch.h_br @ w) ** 2) + sigma_r2 * len(unit))
    beta2 = fraction * cfg.p1 / per_beta2 if per_beta2 > 0 else 0.0
    return np.sqrt(beta2) * unit


def initialize(draw: ScenarioDraw, cfg: ScenarioConfig, seed: int | None = None, *,
               layout: AntennaLayout | None = None) -> AOState:
    """Grid layout, equal-power beam and random-phase reflection at 90% of the ARIS budget."""
    seed = draw.seed if seed is None else seed
    layout = initial_layout(cfg) if layout is None else layout
    ch = assemble_channels(draw, layout, cfg)
    w = equal_power_beam(cfg, layout.n)
    phases = rng_for(seed, STREAM_ARIS_INIT).uniform(0.0, 2 * np.pi, size=layout.m)
    e = scaled_reflection(ch, w, phases, cfg, 0.9)
    rate = achievable_rate(ch, w, e, cfg.sigma_r2, cfg.sigma_u2)
    sol = Solution(w, e, layout, rate, [rate])
    return AOState(sol, 0, [rate])


def _rate(draw, cfg, layout, w, e, sigma_r2):
    return achievable_rate(assemble_channels(draw, layout, cfg), w, e, sigma_r2, cfg.sigma_u2)


def run_ao(draw: ScenarioDraw, cfg: ScenarioConfig, state: AOState,
           options: AOOptions = AOOptions()) -> AOState:
    """Outer loop: beamformer, then position sweeps, then reflection, until the
    rate gain of a full round drops below eps3."""
    sigma_r2 = cfg.sigma_r2 if options.sigma_r2 is None else options.sigma_r2
    sol = state.solution
    w, e, layout = sol.w.copy(), sol.e.copy(), sol.layout
    rate = _rate(draw, cfg, layout, w, e, sigma_r2)
    if not state.rate_trace:
        state.rate_trace.append(rate)
    state.rate_trace[-1] = rate

    def note(block, msg):
        state.stall_flags[block] = True
        state.messages.append(f"iter {state.iter + 1} {block}: {msg}")

    for _ in range(cfg.max_outer_iters):
        t0 = time.perf_counter()
        ch = assemble_channels(draw, layout, cfg)

        try:
            ctx = beam_context(ch, e, cfg, aris_budget=options.aris_budget, sigma_r2=sigma_r2)
            w_new = solve_beamforming(ctx).w
            r_new = achievable_rate(ch, w_new, e, sigma_r2, cfg.sigma_u2)
            if r_new >= rate - ACCEPT_SLACK:
                w, rate = w_new, r_new
            else:
                note("beamform", "step would lower the rate")
        except (FasArisError, np.linalg.LinAlgError) as exc:
            note("beamform", str(exc))

        if options.move_positions and layout.n:
            try:
                res = optimize_positions(draw, cfg, layout, w, e, aris_budget=options.aris_budget,
                                         sigma_r2=sigma_r2)
                r_new = _rate(draw, cfg, res.layout, w, e, sigma_r2)
                if res.stalled:
                    note("positions", "a step was rejected")
                if r_new >= rate - ACCEPT_SLACK:
                    layout, rate = res.layout, r_new
                else:
                    note("positions", "sweep would lower the rate")
            except (FasArisError, np.linalg.LinAlgError) as exc:
                note("positions", str(exc))
            ch = assemble_channels(draw, layout, cfg)

        if options.reflect != "fixed" and layout.m:
            try:
                if options.reflect == "passive":
                    e_new = align_passive_phases(ch, w)
                else:
                    e_new = run_reflection(ch, w, cfg, e, sigma_r2=sigma_r2).e
                r_new = achievable_rate(ch, w, e_new, sigma_r2, cfg.sigma_u2)
                if r_new >= rate - ACCEPT_SLACK:
                    e, rate = e_new, r_new
                else:
                    note("reflect", "step would lower the rate")
            except (FasArisError, np.linalg.LinAlgError) as exc:
                note("reflect", str(exc))

        state.iter += 1
        state.wall_time_ms.append(1e3 * (time.perf_counter() - t0))
        gain = rate - state.rate_trace[-1]
        state.rate_trace.append(rate)
        if gain < cfg.eps3:
            state.converged = True
            break

    state.solution = Solution(w, e, layout, rate, list(state.rate_trace))
    return state


def optimize(draw: ScenarioDraw, cfg: ScenarioConfig, seed: int | None = None) -> AOState:
    """Full proposed scheme from the default initialization."""
    state = initialize(draw, cfg, seed)
    return run_ao(draw, cfg, state)


def is_feasible(state: AOState, draw: ScenarioDraw, cfg: ScenarioConfig,
                options: AOOptions = AOOptions(), **kw) -> bool:
    sol = state.solution
    ch = assemble_channels(draw, sol.layout, cfg)
    return check_feasibility(sol, ch, cfg, aris_budget=options.aris_budget, **kw).ok

