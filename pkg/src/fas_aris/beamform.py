"""Transmit beamforming for fixed antenna positions and reflection matrix.

The lifted problem over W = w w^H drops the rank constraint and becomes an
SDP with two trace constraints (BS power and ARIS power). A rank-one optimum
is then reconstructed in closed form: ``w = (v W v^H)^(-1/2) W v^H`` keeps the
objective ``v W v^H`` exactly and satisfies ``W - w w^H >= 0`` by
Cauchy-Schwarz, so neither trace constraint can get worse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import Channels
from .conic import ConicProblem, solve_sdp
from .errors import ArisBudgetExhausted, SolverError
from .scenario import ScenarioConfig

RANK_ONE_RATIO = 1e-8
# cvxopt reaches ~1e-10 relative accuracy on these small programs, Clarabel ~1e-9
BEAM_BACKENDS = ("cvxopt", "clarabel")


@dataclass(frozen=True)
class BeamContext:
    varpi: np.ndarray  # effective channel h_RU E H_BR + h_BU, shape (N,)
    b_matrix: np.ndarray  # H_BR^H E^H E H_BR
    p0: float
    p1_effective: float  # P1 - sigma_R^2 ||E||_F^2; inf when there is no ARIS budget


def beam_context(ch: Channels, e, cfg: ScenarioConfig, *, aris_budget: bool = True,
                 sigma_r2: float | None = None) -> BeamContext:
    e = np.asarray(e, dtype=complex)
    sigma_r2 = cfg.sigma_r2 if sigma_r2 is None else sigma_r2
    varpi = (ch.h_ru * e) @ ch.h_br + ch.h_bu
    eh = e[:, None] * ch.h_br
    b = eh.conj().T @ eh
    p1_eff = cfg.p1 - sigma_r2 * float(np.sum(np.abs(e) ** 2)) if aris_budget else np.inf
    return BeamContext(varpi, 0.5 * (b + b.conj().T), cfg.p0, p1_eff)


def build_beam_sdp(ctx: BeamContext) -> ConicProblem:
    """maximize v W v^H  s.t. Tr W <= P0, Tr(B W) <= P1_eff, W >= 0."""
    if not ctx.p1_effective > 0:
        raise ArisBudgetExhausted("reflection noise alone exceeds the ARIS budget")
    n = len(ctx.varpi)
    prob = ConicProblem(n, np.outer(ctx.varpi.conj(), ctx.varpi))
    prob.add(np.eye(n), "<=", ctx.p0)
    if np.isfinite(ctx.p1_effective):
        prob.add(ctx.b_matrix, "<=", ctx.p1_effective)
    return prob


def reconstruct_rank_one(w_hat: np.ndarray, varpi: np.ndarray) -> np.ndarray:
    """Rank-one vector with the same objective as ``w_hat`` and dominated by it.

    Returns the zero vector when ``varpi W varpi^H`` vanishes (degenerate).
    """
    wv = w_hat @ varpi.conj()
    q = float(np.real(varpi @ wv))
    if not q > 1e-300:
        return np.zeros(len(varpi), dtype=complex)
    return wv / np.sqrt(q)


def _fit_to_budget(w: np.ndarray, ctx: BeamContext) -> np.ndarray:
    """Shrink w (never grow it) so both constraints hold exactly in floating point."""
    factor = 1.0
    pw = float(np.vdot(w, w).real)
    if pw > ctx.p0:
        factor = min(factor, np.sqrt(ctx.p0 / pw))
    if np.isfinite(ctx.p1_effective):
        pb = float(np.real(np.vdot(w, ctx.b_matrix @ w)))
        if pb > ctx.p1_effective:
            factor = min(factor, np.sqrt(ctx.p1_effective / pb))
    if factor < 1.0:
        w = w * (factor * (1 - 1e-15))
    return w


@dataclass
class BeamResult:
    w: np.ndarray
    relaxed_value: float
    w_hat: np.ndarray | None
    rank_one: bool


def solve_beamforming(ctx: BeamContext) -> BeamResult:
    n = len(ctx.varpi)
    if not np.any(ctx.varpi):
        return BeamResult(np.zeros(n, dtype=complex), 0.0, None, True)
    prob = build_beam_sdp(ctx)
    sol = solve_sdp(prob, scale=np.full(n, np.sqrt(ctx.p0)), backend=BEAM_BACKENDS)
    if not sol.ok:
        raise SolverError(sol.status, "beamforming SDP")
    w_hat = 0.5 * (sol.x + sol.x.conj().T)
    lam, vec = np.linalg.eigh(w_hat)
    rank_one = n == 1 or lam[-2] <= RANK_ONE_RATIO * lam[-1]
    # for a rank-one W this is its principal eigenvector (up to phase); in
    # general it keeps the relaxed objective, which truncating the EVD does not
    w = reconstruct_rank_one(w_hat, ctx.varpi)
    return BeamResult(_fit_to_budget(w, ctx), sol.objective_value, w_hat, bool(rank_one))


def optimize_beamforming(ch: Channels, e, cfg: ScenarioConfig, **kw) -> np.ndarray:
    """Beamformer maximizing the rate for fixed channels and reflection diagonal ``e``."""
    return solve_beamforming(beam_context(ch, e, cfg, **kw)).w
