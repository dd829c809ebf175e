"""Per-antenna MM updates of the fluid-antenna positions.

With w, E and all other antennas fixed, the received signal power depends on
the position t of antenna n through

    g(t) = W_nn |mu(t)|^2 + 2 Re{alpha mu(t)},
    mu(t) = xi^H zeta_BR(t) + omega^H zeta_BU(t),

which is a finite sum of cosines ``A cos(k a.t + phi)`` with k = 2 pi / lambda.
The class-level term table gives g, gradient and Hessian in closed form, and
a uniform curvature bound kappa >= ||Hess g|| yields the concave quadratic
minorant ``g(t_q) + grad^T (t - t_q) - kappa/2 ||t - t_q||^2``.

The ARIS power is quadratic in zeta_BR(t). Majorizing its quadratic part by
``lambda_max`` and the resulting linear part ``2 Re{zeta^H eta}`` by a second
order bound produces a disk-shaped inner approximation of the power
constraint. Together with linearized minimum-distance cuts and the box, each
step is a 2-D projection solved exactly by ``conic.solve_qp2d``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import AntennaLayout, assemble_channels, rx_response_br, tx_response
from .conic import QP2D, solve_qp2d
from .errors import InfeasibleError
from .metrics import achievable_rate, aris_power
from .scenario import ScenarioConfig, ScenarioDraw

KAPPA_FLOOR = 1e-12


def _direction(a) -> np.ndarray:
    """Per-path (sin theta cos phi, cos theta) coefficients, shape (L, 2)."""
    return np.stack([np.sin(a.theta_t) * np.cos(a.phi_t), np.cos(a.theta_t)], axis=1)


@dataclass
class PositionContext:
    """Everything the update of antenna ``n`` needs, frozen at the current iterate."""

    n: int
    k: float  # wavenumber 2 pi / lambda
    t_q: np.ndarray
    dir_br: np.ndarray  # (L_BR, 2)
    dir_bu: np.ndarray  # (L_BU, 2)
    xi: np.ndarray  # column vector xi, xi^H = h_RU E F_BR^H Sigma_BR
    omega: np.ndarray  # omega^H = 1^H Sigma_BU
    w_mat: np.ndarray
    mu: np.ndarray
    alpha_tilde: complex
    beta_tilde: float
    psi: np.ndarray
    psi_tilde: np.ndarray
    phi_scale: float
    tau: np.ndarray
    c1: float
    c2: float
    eta: np.ndarray
    p1_hat: float
    kappa: float
    kappa_hat: float
    power_active: bool = True
    # cosine-term table: amplitude, direction (2,), phase offset
    amp: np.ndarray = field(default=None, repr=False)
    vec: np.ndarray = field(default=None, repr=False)
    off: np.ndarray = field(default=None, repr=False)
    const: float = 0.0

    @property
    def omega_outer(self) -> np.ndarray:
        return np.outer(self.omega, self.omega.conj())

    @property
    def xi_outer(self) -> np.ndarray:
        return np.outer(self.xi, self.xi.conj())


def _term_table(xi, omega, d_br, d_bu, w_nn, alpha):
    """Cosine expansion of g: returns (const, amp, vec, off)."""
    amps, vecs, offs = [], [], []

    def pairs(c, d):
        cc = np.outer(c, c.conj())
        s, k = np.triu_indices(len(c), 1)
        amps.append(2 * w_nn * np.abs(cc[s, k]))
        vecs.append(d[s] - d[k])
        offs.append(-np.angle(cc[s, k]))

    pairs(omega, d_bu)
    pairs(xi, d_br)
    s, k = np.meshgrid(np.arange(len(xi)), np.arange(len(omega)), indexing="ij")
    s, k = s.ravel(), k.ravel()
    amps.append(2 * w_nn * np.abs(xi[s]) * np.abs(omega[k]))
    vecs.append(d_br[s] - d_bu[k])
    offs.append(np.angle(omega[k]) - np.angle(xi[s]))
    a_mag, a_ang = abs(alpha), np.angle(alpha)
    amps.append(2 * a_mag * np.abs(xi))
    vecs.append(d_br)
    offs.append(a_ang - np.angle(xi))
    amps.append(2 * a_mag * np.abs(omega))
    vecs.append(d_bu)
    offs.append(a_ang - np.angle(omega))
    const = w_nn * float(np.sum(np.abs(xi) ** 2) + np.sum(np.abs(omega) ** 2))
    return (const, np.concatenate(amps), np.concatenate([v.reshape(-1, 2) for v in vecs]),
            np.concatenate(offs))


def kappa_bound(ctx: PositionContext) -> float:
    """Uniform bound on the spectral norm of the Hessian of g.

    Each pair term contributes at most ``amp * k^2 * |a|^2`` with
    ``|a|^2 <= 4``; single-path terms have ``|a|^2 <= 1``.
    """
    k2 = ctx.k ** 2
    w_nn = float(ctx.w_mat[ctx.n, ctx.n].real)
    xo, oo = ctx.xi_outer, ctx.omega_outer
    iu_x = np.triu_indices(len(ctx.xi), 1)
    iu_o = np.triu_indices(len(ctx.omega), 1)
    pair_sum = (np.sum(np.abs(oo[iu_o])) + np.sum(np.abs(xo[iu_x]))
                + np.sum(np.abs(ctx.xi)) * np.sum(np.abs(ctx.omega)))
    single = abs(ctx.alpha_tilde) * (np.sum(np.abs(ctx.xi)) + np.sum(np.abs(ctx.omega)))
    return float(16 * k2 * w_nn * pair_sum + 4 * k2 * single)


def build_context(draw: ScenarioDraw, cfg: ScenarioConfig, layout: AntennaLayout, w, e, n: int, *,
                  aris_budget: bool = True, sigma_r2: float | None = None) -> PositionContext:
    w = np.asarray(w, dtype=complex)
    e = np.asarray(e, dtype=complex)
    sigma_r2 = cfg.sigma_r2 if sigma_r2 is None else sigma_r2
    lam = cfg.wavelength
    k = 2 * np.pi / lam
    ch = assemble_channels(draw, layout, cfg)
    f_br = rx_response_br(draw, layout.r_bar, lam)  # (L, M)
    xi_row = ((ch.h_ru * e) @ f_br.conj().T) * draw.sigma_br
    omega_row = np.asarray(draw.sigma_bu, dtype=complex)
    z_br = tx_response(draw, "br", layout.t_bar, lam)  # (L, N)
    z_bu = tx_response(draw, "bu", layout.t_bar, lam)
    mu = xi_row @ z_br + omega_row @ z_bu
    w_mat = np.outer(w, w.conj())
    others = np.arange(layout.n) != n
    alpha = complex(np.sum(w_mat[n, others] * mu[others].conj()))
    beta = float(np.real(mu[others] @ w_mat[np.ix_(others, others)] @ mu[others].conj()))

    # ARIS power as a quadratic form in zeta_BR(t_n)
    sig = draw.sigma_br
    fe = f_br * np.abs(e) ** 2  # F diag(|e|^2)
    psi = (sig.conj()[:, None] * (fe @ f_br.conj().T)) * sig[None, :]
    psi = 0.5 * (psi + psi.conj().T)
    r = z_br[:, others] @ w[others]
    tau = np.conj(w[n]) * r
    c1 = float(np.real(np.vdot(r, psi @ r)))
    psi_t = abs(w[n]) ** 2 * psi
    lam_max = float(np.linalg.eigvalsh(psi_t)[-1]) if psi_t.size else 0.0
    lam_max = max(lam_max, 0.0)
    zq = z_br[:, n]
    L = len(zq)
    c2 = float(lam_max * L + np.real(np.vdot(zq, lam_max * zq - psi_t @ zq)))
    eta = psi @ tau - (lam_max * zq - psi_t @ zq)
    p1_hat = cfg.p1 - c1 - c2 - sigma_r2 * float(np.sum(np.abs(e) ** 2))
    kappa_hat = float(4 * k * k * np.sum(np.abs(eta)))

    xi, omega = xi_row.conj(), omega_row.conj()
    d_br, d_bu = _direction(draw.angles["br"]), _direction(draw.angles["bu"])
    w_nn = float(w_mat[n, n].real)
    const, amp, vec, off = _term_table(xi, omega, d_br, d_bu, w_nn, alpha)
    ctx = PositionContext(
        n=n, k=k, t_q=layout.t_bar[n].copy(), dir_br=d_br, dir_bu=d_bu, xi=xi, omega=omega,
        w_mat=w_mat, mu=mu, alpha_tilde=alpha, beta_tilde=beta, psi=psi, psi_tilde=psi_t,
        phi_scale=lam_max, tau=tau, c1=c1, c2=c2, eta=eta, p1_hat=p1_hat, kappa=0.0,
        kappa_hat=kappa_hat, power_active=aris_budget and layout.m > 0,
        amp=amp, vec=vec, off=off, const=const)
    ctx.kappa = max(kappa_bound(ctx), KAPPA_FLOOR)
    return ctx


# ---------------------------------------------------------------------------
# objective, gradient, Hessian


def _phases(t, ctx):
    return ctx.k * (ctx.vec @ np.asarray(t, dtype=float)) + ctx.off


def g_value(t, ctx: PositionContext) -> float:
    return float(ctx.const + np.sum(ctx.amp * np.cos(_phases(t, ctx))))


def grad_g(t, ctx: PositionContext) -> np.ndarray:
    s = ctx.amp * np.sin(_phases(t, ctx))
    return -ctx.k * (s @ ctx.vec)


def hess_g(t, ctx: PositionContext) -> np.ndarray:
    c = ctx.amp * np.cos(_phases(t, ctx))
    h = -ctx.k ** 2 * (ctx.vec.T * c) @ ctx.vec
    return 0.5 * (h + h.T)


def mu_value(t, ctx: PositionContext) -> complex:
    t = np.asarray(t, dtype=float)
    z_br = np.exp(1j * ctx.k * (ctx.dir_br @ t))
    z_bu = np.exp(1j * ctx.k * (ctx.dir_bu @ t))
    return complex(ctx.xi.conj() @ z_br + ctx.omega.conj() @ z_bu)


def g_direct(t, ctx: PositionContext) -> float:
    """Same quantity as g_value, evaluated with complex arithmetic."""
    mu = mu_value(t, ctx)
    return float(ctx.w_mat[ctx.n, ctx.n].real * abs(mu) ** 2 + 2 * (ctx.alpha_tilde * mu).real)


def minorant(t, ctx: PositionContext, t_q=None) -> float:
    """Concave quadratic lower bound of g touching it at ``t_q``."""
    t_q = ctx.t_q if t_q is None else np.asarray(t_q, dtype=float)
    d = np.asarray(t, dtype=float) - t_q
    return float(g_value(t_q, ctx) + grad_g(t_q, ctx) @ d - 0.5 * ctx.kappa * d @ d)


# ---------------------------------------------------------------------------
# ARIS power surrogate chain


def _zeta_br(t, ctx):
    return np.exp(1j * ctx.k * (ctx.dir_br @ np.asarray(t, dtype=float)))


def power_exact(t, ctx: PositionContext) -> float:
    """``|w_n|^2 zeta^H Psi zeta + 2 Re{zeta^H Psi tau} + c1`` = ||E H_BR w||^2."""
    z = _zeta_br(t, ctx)
    return float(np.real(np.vdot(z, ctx.psi_tilde @ z)) + 2 * np.real(np.vdot(z, ctx.psi @ ctx.tau))
                 + ctx.c1)


def power_majorant(t, ctx: PositionContext) -> float:
    """Quadratic part replaced by its lambda_max bound at ``t_q``: ``g_hat(t) + c1 + c2``."""
    return ghat_value(t, ctx) + ctx.c1 + ctx.c2


def ghat_value(t, ctx: PositionContext) -> float:
    return float(2 * np.real(np.vdot(_zeta_br(t, ctx), ctx.eta)))


def ghat_grad(t, ctx: PositionContext) -> np.ndarray:
    # 2 Re{zeta^H eta} = 2 sum |eta_s| cos(k rho_s - angle eta_s)
    ph = ctx.k * (ctx.dir_br @ np.asarray(t, dtype=float)) - np.angle(ctx.eta)
    return -2 * ctx.k * ((np.abs(ctx.eta) * np.sin(ph)) @ ctx.dir_br)


@dataclass(frozen=True)
class PowerSurrogate:
    """``delta(t) = value + grad^T (t - t_q) + curvature/2 ||t - t_q||^2``."""

    t_q: np.ndarray
    value: float
    grad: np.ndarray
    curvature: float

    def __call__(self, t) -> float:
        d = np.asarray(t, dtype=float) - self.t_q
        return float(self.value + self.grad @ d + 0.5 * self.curvature * d @ d)


def power_surrogate(t, ctx: PositionContext, t_q=None, curvature: float | None = None):
    """Majorant of ghat expanded at ``t_q``; returns (value at t, surrogate)."""
    t_q = ctx.t_q if t_q is None else np.asarray(t_q, dtype=float)
    curvature = ctx.kappa_hat if curvature is None else curvature
    s = PowerSurrogate(t_q.copy(), ghat_value(t_q, ctx), ghat_grad(t_q, ctx), curvature)
    return s(t), s


# ---------------------------------------------------------------------------
# position step


def distance_cut(t, t_q, t_v) -> float:
    """First-order expansion of ||t - t_v|| at t_q; a global lower bound (convexity)."""
    d = np.asarray(t_q) - np.asarray(t_v)
    return float(d @ (np.asarray(t) - np.asarray(t_v)) / np.linalg.norm(d))


def build_qp(ctx: PositionContext, layout: AntennaLayout, cfg: ScenarioConfig,
             kappa: float | None = None, kappa_hat: float | None = None) -> QP2D:
    """Position sub-problem, normalized by kappa: maximize -1/2|t|^2 + (t_q + grad/kappa)^T t.

    ``kappa`` and ``kappa_hat`` default to the closed-form curvature bounds.
    """
    kappa = ctx.kappa if kappa is None else kappa
    t_q = ctx.t_q
    rows, rhs = [], []
    for v in range(layout.n):
        if v == ctx.n:
            continue
        t_v = layout.t_bar[v]
        d = t_q - t_v
        nd = np.linalg.norm(d)
        if nd == 0:
            raise InfeasibleError("coincident antennas: distance cut undefined")
        u = d / nd
        # u^T (t - t_v) >= D  ->  -u^T t <= -D - u^T t_v
        rows.append(-u)
        rhs.append(-cfg.min_dist - u @ t_v)
    ball = None
    if ctx.power_active:
        _, sur = power_surrogate(t_q, ctx, curvature=kappa_hat)
        slack = ctx.p1_hat - sur.value
        if slack < 0:
            # t_q satisfies the chain up to rounding; larger deficits mean an infeasible iterate
            if slack < -1e-9 * cfg.p1:
                raise InfeasibleError("current position violates the power surrogate")
            slack = 0.0
        if sur.curvature > 1e-300 * max(1.0, np.linalg.norm(sur.grad)):
            center = t_q - sur.grad / sur.curvature
            radius2 = 2 * slack / sur.curvature + (sur.grad @ sur.grad) / sur.curvature ** 2
            ball = (center, float(np.sqrt(max(radius2, 0.0))))
        elif np.any(sur.grad):
            rows.append(sur.grad)
            rhs.append(slack + sur.grad @ t_q)
    a = np.array(rows, dtype=float).reshape(-1, 2)
    c = np.array(rhs, dtype=float)
    b = t_q + grad_g(t_q, ctx) / kappa
    h = cfg.region_half
    return QP2D(-np.eye(2), b, a, c, box=((-h, -h), (h, h)), ball=ball)


@dataclass
class StepResult:
    t: np.ndarray
    accepted: bool
    stalled: bool
    reason: str = ""


def update_position(n: int, draw, cfg, layout, w, e, *, aris_budget: bool = True,
                    sigma_r2: float | None = None, ctx: PositionContext | None = None) -> StepResult:
    """One MM step for antenna ``n``.

    Curvatures ``kappa / 2^j`` are tried from ``j = cfg.mm_backtrack_levels``
    down to 0; the first step whose true objective clears the matching
    quadratic minorant is taken. With ``j = 0`` the minorant is a global
    bound, so a step always qualifies. The step is still rejected unless the
    true (non-linearized) constraints hold.
    """
    sigma_r2 = cfg.sigma_r2 if sigma_r2 is None else sigma_r2
    ctx = ctx or build_context(draw, cfg, layout, w, e, n, aris_budget=aris_budget, sigma_r2=sigma_r2)
    t_q = ctx.t_q
    g_q = g_value(t_q, ctx)
    grad_q = grad_g(t_q, ctx)
    tol = 1e-12 * max(abs(ctx.const), 1e-300)

    def violation(t_new):
        if g_value(t_new, ctx) < g_q - 1e-9 * max(abs(ctx.const), 1e-300):
            return "ascent check failed"
        others = np.delete(layout.t_bar, n, axis=0)
        if len(others) and np.min(np.linalg.norm(others - t_new, axis=1)) < cfg.min_dist * (1 - 1e-9):
            return "distance check failed"
        if np.max(np.abs(t_new)) > cfg.region_half * (1 + 1e-9):
            return "region check failed"
        if ctx.power_active:
            ch = assemble_channels(draw, layout.with_position(n, t_new), cfg)
            if aris_power(ch, w, e, sigma_r2) > cfg.p1:
                return "power check failed"
        return None

    for j in range(int(cfg.mm_backtrack_levels), -1, -1):
        scale = 2.0 ** (-j)
        kap = ctx.kappa * scale
        try:
            qp = build_qp(ctx, layout, cfg, kappa=kap, kappa_hat=ctx.kappa_hat * scale)
            t_new = solve_qp2d(qp)
        except InfeasibleError as exc:
            if j > 0:
                continue
            return StepResult(t_q.copy(), False, True, str(exc))
        if np.allclose(t_new, t_q, rtol=0, atol=1e-15):
            if j > 0:
                continue
            return StepResult(t_q.copy(), False, False, "stationary")
        d = t_new - t_q
        if j > 0 and g_value(t_new, ctx) < g_q + grad_q @ d - 0.5 * kap * (d @ d) - tol:
            continue
        reason = violation(t_new)
        if reason is None:
            return StepResult(t_new, True, False)
        if j == 0:
            return StepResult(t_q.copy(), False, True, reason)
    raise AssertionError("unreachable")


@dataclass
class PositionResult:
    layout: AntennaLayout
    sweeps: int
    rates: list[float]
    stalled: bool
    moves: int


def optimize_positions(draw: ScenarioDraw, cfg: ScenarioConfig, layout: AntennaLayout, w, e, *,
                       aris_budget: bool = True, sigma_r2: float | None = None) -> PositionResult:
    """Gauss-Seidel MM sweeps over n = 0..N-1 until the rate gain drops below eps1."""
    sigma_r2 = cfg.sigma_r2 if sigma_r2 is None else sigma_r2

    def rate_of(lay):
        return achievable_rate(assemble_channels(draw, lay, cfg), w, e, sigma_r2, cfg.sigma_u2)

    rates = [rate_of(layout)]
    stalled, moves, sweeps = False, 0, 0
    for _ in range(cfg.max_inner_iters):
        sweeps += 1
        for n in range(layout.n):
            step = update_position(n, draw, cfg, layout, w, e, aris_budget=aris_budget,
                                   sigma_r2=sigma_r2)
            stalled |= step.stalled
            if step.accepted:
                layout = layout.with_position(n, step.t)
                moves += 1
        rates.append(rate_of(layout))
        if rates[-1] - rates[-2] < cfg.eps1:
            break
    return PositionResult(layout, sweeps, rates, stalled, moves)
