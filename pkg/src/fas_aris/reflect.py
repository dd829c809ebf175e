"""ARIS reflection-matrix optimization.

With ``e_tilde = [conj(e); 1]`` the received signal power, the noise power at
the UE and the ARIS amplifier power are all Hermitian forms in e_tilde:

    signal = e~^H V e~ + |h_BU w|^2,   noise = e~^H Vbar e~,   power = e~^H Vhat e~.

Lifting to ``E~ = e~ e~^H`` and introducing auxiliaries chi (SINR) and varrho
(noise) turns SINR maximization into ``max chi`` s.t. ``chi * varrho <=
signal``, ``noise <= varrho``. The bilinear term is handled by successive
convex approximation (a convex quadratic majorant touching chi*varrho at the
previous iterate) and the rank-one constraint by sequential rank-one
constraint relaxation: ``u^H E~ u >= vartheta Tr(E~)`` with u the leading
eigenvector of the previous iterate and vartheta driven towards one.

For numerical conditioning the lifted programs are solved in units where the
UE noise power is one, the ARIS budget is one and the reflection amplitudes
are O(1); the rank test and the eigenvector cut live in these units as well.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import Channels
from .conic import ConicProblem, SquareBound, solve_sdp
from .metrics import achievable_rate, aris_power, noise_power, sinr
from .scenario import ScenarioConfig

EPS_FLOOR = 1e-6
RANK_TOL = 1e-4  # stop only once lambda_max / Tr >= 1 - RANK_TOL
# the cut with vartheta = 1 has no strictly feasible point, which stalls interior-point solvers
VARTHETA_MAX = 1 - 1e-5
MIN_AMPLITUDE = 1e-9


def lift(e) -> np.ndarray:
    """``e_tilde = [conj(e); 1]``."""
    return np.concatenate([np.conj(np.asarray(e, dtype=complex)), [1.0 + 0j]])


def build_v_matrices(ch: Channels, w, sigma_r2: float, sigma_u2: float):
    """Return (V, Vbar, Vhat, direct_power) for the lifted reflection program."""
    w = np.asarray(w, dtype=complex)
    hw = ch.h_br @ w
    a = ch.h_ru * hw
    b = complex(ch.h_bu @ w)
    m = ch.m
    v = np.zeros((m + 1, m + 1), dtype=complex)
    v[:m, :m] = np.outer(a, a.conj())
    v[:m, m] = a * np.conj(b)
    v[m, :m] = np.conj(v[:m, m])
    v_bar = np.zeros((m + 1, m + 1), dtype=complex)
    v_bar[:m, :m] = np.diag(sigma_r2 * np.abs(ch.h_ru) ** 2)
    v_bar[m, m] = sigma_u2
    v_hat = np.zeros((m + 1, m + 1), dtype=complex)
    v_hat[:m, :m] = np.diag(np.abs(hw) ** 2 + sigma_r2)
    return v, v_bar, v_hat, float(abs(b) ** 2)


def top_eigenpair(x: np.ndarray) -> tuple[float, np.ndarray]:
    lam, vec = np.linalg.eigh(0.5 * (x + x.conj().T))
    return float(lam[-1]), vec[:, -1]


def rank_ratio(x: np.ndarray) -> float:
    tr = float(np.trace(x).real)
    return top_eigenpair(x)[0] / tr if tr > 0 else 0.0


def srcr_cut(e_tilde_prev: np.ndarray, vartheta: float) -> np.ndarray:
    """Coefficient matrix A with the cut written as ``Re Tr(A E~) >= 0``.

    A = u u^H - vartheta I encodes ``u^H E~ u >= vartheta Tr(E~)``.
    """
    _, u = top_eigenpair(e_tilde_prev)
    return np.outer(u, u.conj()) - vartheta * np.eye(len(u))


def update_vartheta(e_tilde_new: np.ndarray, eps: float) -> float:
    return min(1.0, rank_ratio(e_tilde_new) + eps)


def bilinear_majorant(chi, varrho, chi_p, varrho_p):
    """Convex upper bound of ``chi * varrho`` that touches it at (chi_p, varrho_p).

    ``chi varrho = (chi + varrho)^2/4 - (chi - varrho)^2/4``; the concave part is
    replaced by its tangent at the expansion point.
    """
    dp = chi_p - varrho_p
    return 0.25 * (chi + varrho) ** 2 - 0.25 * dp ** 2 - 0.5 * dp * (chi - chi_p - varrho + varrho_p)


@dataclass
class ReflectState:
    e_tilde_mat: np.ndarray  # scaled units
    chi: float
    varrho: float
    vartheta: float
    eps: float
    v_mat: np.ndarray
    v_bar: np.ndarray
    v_hat: np.ndarray
    direct_power: float


@dataclass
class ReflectResult:
    e: np.ndarray
    rate: float
    iterations: int
    rank_ratio: float
    chi: float
    vartheta_history: list[float] = field(default_factory=list)
    rate_history: list[float] = field(default_factory=list)
    failures: int = 0
    state: ReflectState | None = None


def _scaled_problem(v, v_bar, v_hat, dp, chi_p, rho_p, cut, pins: bool):
    """Lifted SCA program in normalized units (variables E~' and y = [chi, varrho])."""
    d = v.shape[0]
    dpp = chi_p - rho_p
    prob = ConicProblem(d, np.zeros((d, d), dtype=complex), n_aux=2, objective_aux=np.array([1.0, 0.0]))
    # ((chi + varrho)/2)^2 <= Tr(V E) + dp - dpp^2/4 + dpp/2 (chi - varrho)
    prob.square_bounds.append(SquareBound(np.array([0.5, 0.5]), 0.0, v,
                                          np.array([0.5 * dpp, -0.5 * dpp]), dp - 0.25 * dpp ** 2,
                                          ref=0.5 * (chi_p + rho_p)))
    prob.add(v_bar, "<=", 0.0, aux=np.array([0.0, -1.0]))
    if pins:
        prob.fixed_entries.extend((i, i, 1.0) for i in range(d))
    else:
        prob.add(v_hat, "<=", 1.0)
        prob.fixed_entries.append((d - 1, d - 1, 1.0))
    if cut is not None:
        prob.add(cut, ">=", 0.0)
    return prob


def _extract(x_scaled: np.ndarray, s: np.ndarray, pins: bool) -> np.ndarray | None:
    lam, u = top_eigenpair(x_scaled)
    v = np.sqrt(max(lam, 0.0)) * u
    if not abs(v[-1]) > 1e-12:
        return None
    et = (v / v[-1]) * s
    e = np.conj(et[:-1])
    if pins:
        return np.exp(1j * np.angle(e))
    mag = np.abs(e)
    small = mag < MIN_AMPLITUDE
    if np.any(small):
        e = np.where(small, MIN_AMPLITUDE * np.exp(1j * np.angle(e)), e)
    return e


def _fit_power(ch, w, e, cfg, sigma_r2):
    p = aris_power(ch, w, e, sigma_r2)
    if p > cfg.p1:
        e = e * np.sqrt(cfg.p1 / p) * (1 - 1e-12)
    return e


def run_reflection(ch: Channels, w, cfg: ScenarioConfig, e_init, *, passive: bool = False,
                   sigma_r2: float | None = None) -> ReflectResult:
    """SCA + SRCR iterations; returns the best feasible reflection vector seen.

    ``passive`` replaces the amplifier budget by unit-modulus pins on the
    diagonal of E~ (passive surface).
    """
    sigma_r2 = (0.0 if passive else cfg.sigma_r2) if sigma_r2 is None else sigma_r2
    nu = cfg.sigma_u2
    w = np.asarray(w, dtype=complex)
    e_init = np.asarray(e_init, dtype=complex)
    m = ch.m

    def rate_of(e):
        return achievable_rate(ch, w, e, sigma_r2, nu)

    v, v_bar, v_hat, dp = build_v_matrices(ch, w, sigma_r2, nu)
    beta_ref = 1.0 if passive else float(np.sqrt(np.mean(np.abs(e_init) ** 2)))
    if not beta_ref > 0:
        beta_ref = 1.0
    s = np.concatenate([np.full(m, beta_ref), [1.0]])
    S = np.outer(s, s)
    # normalized data: noise in units of sigma_u^2, power in units of P1, amplitudes ~ 1
    vs, vbs, vhs = v * S / nu, v_bar * S / nu, v_hat * S / cfg.p1
    dps = dp / nu

    best_e, best_rate = e_init.copy(), rate_of(e_init)
    chi_p = sinr(ch, w, e_init, sigma_r2, nu)
    rho_p = noise_power(ch, e_init, sigma_r2, nu) / nu
    x_prev = np.outer(lift(e_init) / s, np.conj(lift(e_init) / s))
    vartheta, eps = 0.0, cfg.srcr_eps0
    state = ReflectState(x_prev, chi_p, rho_p, vartheta, eps, v, v_bar, v_hat, dp)
    thetas, rates = [], []
    prev_rate, failures, it = best_rate, 0, 0
    ratio = rank_ratio(x_prev)
    chi_solved = chi_p
    for it in range(1, cfg.max_srcr_iters + 1):
        cut = srcr_cut(x_prev, vartheta) if vartheta > 0 else None
        prob = _scaled_problem(vs, vbs, vhs, dps, chi_p, rho_p, cut, passive)
        sol = solve_sdp(prob)
        thetas.append(vartheta)
        if sol.ok:
            x_prev = 0.5 * (sol.x + sol.x.conj().T)
            chi_p, rho_p = float(sol.aux[0]), float(sol.aux[1])
            chi_solved = chi_p
            eps = cfg.srcr_eps0
        else:
            failures += 1
            eps = eps / 2
            if eps < EPS_FLOOR:
                break
        ratio = rank_ratio(x_prev)
        vartheta = min(update_vartheta(x_prev, eps), VARTHETA_MAX)
        e_cand = _extract(x_prev, s, passive)
        rate = prev_rate
        if e_cand is not None:
            if not passive:
                e_cand = _fit_power(ch, w, e_cand, cfg, sigma_r2)
            rate = rate_of(e_cand)
            if rate > best_rate:
                best_e, best_rate = e_cand, rate
            if sol.ok and ratio >= 1 - RANK_TOL:
                # expand the bilinear bound at the rank-one point itself
                chi_p = sinr(ch, w, e_cand, sigma_r2, nu)
                rho_p = noise_power(ch, e_cand, sigma_r2, nu) / nu
        rates.append(rate)
        if sol.ok and ratio >= 1 - RANK_TOL and abs(rate - prev_rate) < cfg.eps2:
            break
        prev_rate = rate
    state.e_tilde_mat, state.chi, state.varrho = x_prev, chi_p, rho_p
    state.vartheta, state.eps = vartheta, eps
    return ReflectResult(best_e, best_rate, it, ratio, chi_solved, thetas, rates, failures, state)


def optimize_reflection(ch: Channels, w, cfg: ScenarioConfig, e_init, **kw) -> np.ndarray:
    return run_reflection(ch, w, cfg, e_init, **kw).e


def align_passive_phases(ch: Channels, w) -> np.ndarray:
    """Unit-modulus reflection maximizing ``|(h_RU E H_BR + h_BU) w|``.

    With unit amplitudes the noise term no longer depends on the phases, so
    co-phasing every reflected component with the direct path is optimal.
    """
    w = np.asarray(w, dtype=complex)
    c = ch.h_ru * (ch.h_br @ w)
    b = complex(ch.h_bu @ w)
    ref = np.angle(b) if abs(b) > 0 else (np.angle(np.sum(c)) if np.any(c) else 0.0)
    return np.exp(1j * (ref - np.angle(c)))
