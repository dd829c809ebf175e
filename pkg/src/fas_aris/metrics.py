"""Achievable rate, ARIS amplification power and feasibility reports."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import AntennaLayout, Channels
from .scenario import ScenarioConfig

FEAS_TOL = 1e-6


@dataclass
class Solution:
    """An operating point: beamformer, reflection diagonal, layout and its rate."""

    w: np.ndarray
    e: np.ndarray
    layout: AntennaLayout
    rate_bits: float = 0.0
    trace: list[float] = field(default_factory=list)


def received_signal_power(ch: Channels, w, e) -> float:
    varpi = (ch.h_ru * e) @ ch.h_br + ch.h_bu
    return float(abs(varpi @ w) ** 2)


def noise_power(ch: Channels, e, sigma_r2: float, sigma_u2: float) -> float:
    return float(sigma_r2 * np.sum(np.abs(ch.h_ru * e) ** 2) + sigma_u2)


def sinr(ch: Channels, w, e, sigma_r2: float, sigma_u2: float) -> float:
    return received_signal_power(ch, w, e) / noise_power(ch, e, sigma_r2, sigma_u2)


def achievable_rate(ch: Channels, w, e, sigma_r2: float, sigma_u2: float) -> float:
    """``log2(1 + |(h_RU E H_BR + h_BU) w|^2 / (sigma_R^2 ||h_RU E||^2 + sigma_u^2))``."""
    return float(np.log2(1.0 + sinr(ch, w, e, sigma_r2, sigma_u2)))


def aris_power(ch: Channels, w, e, sigma_r2: float) -> float:
    """Expected amplifier output power ``||E H_BR w||^2 + sigma_R^2 ||E||_F^2``."""
    e = np.asarray(e)
    return float(np.sum(np.abs(e * (ch.h_br @ w)) ** 2) + sigma_r2 * np.sum(np.abs(e) ** 2))


def pairwise_min_distance(t_bar) -> tuple[float, tuple[int, int] | None]:
    t_bar = np.asarray(t_bar)
    n = len(t_bar)
    best, pair = np.inf, None
    for i in range(n):
        for j in range(i + 1, n):
            d = float(np.linalg.norm(t_bar[i] - t_bar[j]))
            if d < best:
                best, pair = d, (i, j)
    return best, pair


@dataclass
class FeasibilityReport:
    ok: bool
    violations: list[tuple[str, float]]

    def __bool__(self) -> bool:
        return self.ok


def check_feasibility(sol: Solution, ch: Channels, cfg: ScenarioConfig, *,
                      tol: float = FEAS_TOL, aris_budget: bool = True,
                      region: bool = True, unit_modulus: bool = False) -> FeasibilityReport:
    """Check every constraint of the joint problem; slack < 0 marks a violation.

    ``aris_budget``/``region`` switch off constraints that a baseline does not
    have (passive surfaces, fixed antenna pools); ``unit_modulus`` adds the
    passive-surface amplitude constraint.
    """
    violations = []
    pw = float(np.vdot(sol.w, sol.w).real)
    if pw > cfg.p0 * (1 + tol):
        violations.append(("bs_power", cfg.p0 - pw))
    if aris_budget:
        pa = aris_power(ch, sol.w, sol.e, cfg.sigma_r2)
        if pa > cfg.p1 * (1 + tol):
            violations.append(("aris_power", cfg.p1 - pa))
    if unit_modulus:
        dev = float(np.max(np.abs(np.abs(sol.e) - 1.0), initial=0.0))
        if dev > tol:
            violations.append(("unit_modulus", -dev))
    t_bar = sol.layout.t_bar
    if region:
        excess = float(np.max(np.abs(t_bar), initial=0.0)) - cfg.region_half
        if excess > tol * cfg.region_half:
            violations.append(("region", -excess))
    dmin, _ = pairwise_min_distance(t_bar)
    if dmin < cfg.min_dist * (1 - tol):
        violations.append(("min_dist", dmin - cfg.min_dist))
    return FeasibilityReport(not violations, violations)
