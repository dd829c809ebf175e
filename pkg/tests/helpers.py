"""Instance generators shared by the unit and acceptance tests."""

import math

import numpy as np

from fas_aris.ao import initialize
from fas_aris.beamform import beam_context
from fas_aris.channel import assemble_channels
from fas_aris.errors import ArisBudgetExhausted
from fas_aris.scenario import sample_scenario


def operating_points(cfg, count, seed0=2000):
    """(draw, layout, w, e, rng) with the initial layout and reflection and a random full-power w."""
    out = []
    for k in range(count):
        seed = seed0 + k
        draw = sample_scenario(cfg, seed)
        sol = initialize(draw, cfg, seed).solution
        rng = np.random.default_rng(seed)
        w = rng.standard_normal(cfg.n_antennas) + 1j * rng.standard_normal(cfg.n_antennas)
        w *= math.sqrt(cfg.p0) / np.linalg.norm(w)
        out.append((draw, sol.layout, w, sol.e, rng))
    return out


def beam_instances(cfg, count, seed0=500):
    """Beamforming contexts from independent draws, random phases and amplitudes.

    The amplitude scale is spread over two decades so that either trace
    constraint (or both) can be the active one.
    """
    out = []
    k = 0
    while len(out) < count:
        seed = seed0 + k
        k += 1
        draw = sample_scenario(cfg, seed)
        sol = initialize(draw, cfg, seed).solution
        ch = assemble_channels(draw, sol.layout, cfg)
        rng = np.random.default_rng(seed)
        e = sol.e * rng.uniform(0.5, 1.0, cfg.m_elements) * 10 ** rng.uniform(-1, 0.3)
        e = e * np.exp(1j * rng.uniform(0, 2 * np.pi, cfg.m_elements))
        try:
            out.append(beam_context(ch, e, cfg))
        except ArisBudgetExhausted:
            continue
    return out
