"""Comparison schemes: fixed antennas, antenna selection, random phases, passive surface."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .ao import AOOptions, AOState, equal_power_beam, initial_layout, run_ao, scaled_reflection
from .channel import AntennaLayout, aris_element_positions, assemble_channels
from .errors import ConfigError, FasArisError
from .metrics import Solution, achievable_rate, check_feasibility
from .scenario import (STREAM_ARIS_INIT, STREAM_PASSIVE_INIT, STREAM_RANDOM_PHASE, ScenarioConfig,
                       ScenarioDraw, convert_dbm, rng_for)

KINDS = ("fpa", "eas", "random_phase", "passive")


def passive_element_count(cfg: ScenarioConfig) -> int:
    """Passive elements affordable with the ARIS power: ``(P1 + M (PC + PDC)) / PC``, in mW."""
    pc = convert_dbm(cfg.passive_pc_dbm)
    if not pc > 0:
        raise ConfigError("passive_pc_dbm must give a positive power")
    pdc = convert_dbm(cfg.passive_pdc_dbm)
    count = (convert_dbm(cfg.p1_dbm) + cfg.m_elements * (pc + pdc)) / pc
    return int(math.floor(count + 1e-9))


def eas_pool(cfg: ScenarioConfig) -> np.ndarray:
    """2N candidate positions on the half-wavelength lattice of the initial grid.

    The first N rows are the initial grid itself, so the FPA layout is one of
    the candidate subsets; the remaining N are the lattice points closest to
    the array centre (ties broken by |y|, y, x).
    """
    base = initial_layout(cfg).t_bar
    n = len(base)
    spacing = max(cfg.wavelength / 2.0, cfg.min_dist)
    # lattice through the grid points, wide enough to hold N more points
    span = int(math.ceil(math.sqrt(2 * n))) + 2
    x0, y0 = base[0]
    cand = [(x0 + i * spacing, y0 + j * spacing) for i in range(-span, span + 1)
            for j in range(-span, span + 1)]
    taken = {(round(x, 12), round(y, 12)) for x, y in base}
    extra = [p for p in cand if (round(p[0], 12), round(p[1], 12)) not in taken]
    extra.sort(key=lambda p: (round(math.hypot(*p), 12), round(abs(p[1]), 12), p[1], p[0]))
    return np.vstack([base, np.array(extra[:n], dtype=float).reshape(-1, 2)])


@dataclass
class BaselineResult:
    kind: str
    solution: Solution
    state: AOState
    feasible: bool
    subsets: int = 0
    meta: dict = field(default_factory=dict)


def _start(draw, cfg, layout, w, e, sigma_r2) -> AOState:
    rate = achievable_rate(assemble_channels(draw, layout, cfg), w, e, sigma_r2, cfg.sigma_u2)
    return AOState(Solution(w, e, layout, rate, [rate]), 0, [rate])


def _proposed_start(draw, cfg, seed, layout):
    ch = assemble_channels(draw, layout, cfg)
    w = equal_power_beam(cfg, layout.n)
    phases = rng_for(seed, STREAM_ARIS_INIT).uniform(0.0, 2 * np.pi, size=layout.m)
    return w, scaled_reflection(ch, w, phases, cfg, 0.9)


def _feasible(state, draw, cfg, **kw) -> bool:
    sol = state.solution
    return check_feasibility(sol, assemble_channels(draw, sol.layout, cfg), cfg, **kw).ok


def run_fpa(draw: ScenarioDraw, cfg: ScenarioConfig, seed: int) -> BaselineResult:
    layout = initial_layout(cfg)
    w, e = _proposed_start(draw, cfg, seed, layout)
    state = run_ao(draw, cfg, _start(draw, cfg, layout, w, e, cfg.sigma_r2),
                   AOOptions(move_positions=False))
    return BaselineResult("fpa", state.solution, state, _feasible(state, draw, cfg))


def run_eas(draw: ScenarioDraw, cfg: ScenarioConfig, seed: int) -> BaselineResult:
    """Exhaustive N-of-2N antenna selection; every subset optimized over (w, E)."""
    pool = eas_pool(cfg)
    n = cfg.n_antennas
    r_bar = aris_element_positions(cfg.m_elements, cfg.wavelength)
    best, count = None, 0
    for idx in itertools.combinations(range(len(pool)), n):
        count += 1
        layout = AntennaLayout(pool[list(idx)], r_bar)
        w, e = _proposed_start(draw, cfg, seed, layout)
        state = run_ao(draw, cfg, _start(draw, cfg, layout, w, e, cfg.sigma_r2),
                       AOOptions(move_positions=False))
        if not _feasible(state, draw, cfg, region=False):
            continue
        if best is None or state.solution.rate_bits > best.solution.rate_bits:
            best = state
    if best is None:
        raise FasArisError("no feasible antenna subset")
    return BaselineResult("eas", best.solution, best, True, subsets=count,
                          meta={"pool_size": len(pool)})


def run_random_phase(draw: ScenarioDraw, cfg: ScenarioConfig, seed: int) -> BaselineResult:
    """Random ARIS phases, common amplitude spending the full ARIS budget for the
    equal-power beam; then beamformer and positions optimized with E frozen."""
    layout = initial_layout(cfg)
    ch = assemble_channels(draw, layout, cfg)
    w_eq = equal_power_beam(cfg, layout.n)
    phases = rng_for(seed, STREAM_RANDOM_PHASE).uniform(0.0, 2 * np.pi, size=layout.m)
    e = scaled_reflection(ch, w_eq, phases, cfg, 1.0 - 1e-12)
    state = run_ao(draw, cfg, _start(draw, cfg, layout, w_eq, e, cfg.sigma_r2),
                   AOOptions(reflect="fixed"))
    return BaselineResult("random_phase", state.solution, state, _feasible(state, draw, cfg),
                          meta={"positions_optimized": True})


def run_passive(draw: ScenarioDraw, cfg: ScenarioConfig, seed: int) -> BaselineResult:
    """Unit-modulus surface with ``passive_element_count`` elements and no amplifier."""
    m = passive_element_count(cfg)
    layout = initial_layout(cfg, m=m)
    w = equal_power_beam(cfg, layout.n)
    e = np.exp(1j * rng_for(seed, STREAM_PASSIVE_INIT).uniform(0.0, 2 * np.pi, size=m))
    options = AOOptions(reflect="passive", aris_budget=False, sigma_r2=0.0)
    state = run_ao(draw, cfg, _start(draw, cfg, layout, w, e, 0.0), options)
    ok = _feasible(state, draw, cfg, aris_budget=False, unit_modulus=True)
    return BaselineResult("passive", state.solution, state, ok,
                          meta={"m_passive": m, "positions_optimized": True})


_RUNNERS = {"fpa": run_fpa, "eas": run_eas, "random_phase": run_random_phase,
            "passive": run_passive}


def run_baseline(kind: str, draw: ScenarioDraw, cfg: ScenarioConfig, seed: int | None = None
                 ) -> BaselineResult:
    if kind not in _RUNNERS:
        raise ConfigError(f"unknown baseline {kind!r}; expected one of {', '.join(KINDS)}")
    seed = draw.seed if seed is None else seed
    return _RUNNERS[kind](draw, cfg, seed)

