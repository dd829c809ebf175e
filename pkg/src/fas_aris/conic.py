"""Small convex programs: Hermitian SDPs and 2-D concave QPs.

``solve_sdp`` lowers a complex Hermitian program to a real cone LP and hands
it to cvxopt's interior-point ``conelp``. The Hermitian variable X (d x d) is
parametrized by d^2 reals (diagonal, then Re/Im of the strict upper triangle)
and the PSD constraint is imposed on the real embedding
``[[Re X, -Im X], [Im X, Re X]]``, which is PSD iff X is.

Besides linear trace constraints the program may carry a few free auxiliary
scalars and "square bounds" ``(g.y + g0)^2 <= Re Tr(A X) + a.y + a0``; these
are rotated second-order cones and are what the SCA step of the reflection
optimizer needs.

``solve_qp2d`` is exact: it enumerates candidate active sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import clarabel
import numpy as np
from cvxopt import matrix, solvers
from scipy import sparse

from .errors import InfeasibleError

MAX_DIM = 64
DEFAULT_TOL = 1e-8
BACKENDS = ("clarabel", "cvxopt")

SENSES = ("<=", "=", ">=")


@dataclass
class LinearConstraint:
    """``Re Tr(a X) + aux . y  (sense)  rhs``."""

    a: np.ndarray
    sense: str
    rhs: float
    aux: np.ndarray | None = None


@dataclass
class SquareBound:
    """``(g . y + g0)^2 <= Re Tr(a X) + a_aux . y + a0``.

    ``ref`` is the expected magnitude of ``g . y + g0``; it balances the two
    factors of the rotated cone and matters for conditioning only.
    """

    g: np.ndarray
    g0: float
    a: np.ndarray | None
    a_aux: np.ndarray
    a0: float
    ref: float = 1.0


@dataclass
class ConicProblem:
    """maximize ``Re Tr(C X) + c_aux . y`` over Hermitian PSD X and free y."""

    dim: int
    objective: np.ndarray
    constraints: list[LinearConstraint] = field(default_factory=list)
    fixed_entries: list[tuple[int, int, complex]] = field(default_factory=list)
    n_aux: int = 0
    objective_aux: np.ndarray | None = None
    square_bounds: list[SquareBound] = field(default_factory=list)

    def add(self, a, sense: str, rhs: float, aux=None) -> None:
        self.constraints.append(LinearConstraint(np.asarray(a, dtype=complex), sense, float(rhs),
                                                 None if aux is None else np.asarray(aux, float)))

    def check(self) -> None:
        d = self.dim
        if d < 1 or d > MAX_DIM:
            raise ValueError(f"matrix dimension {d} outside [1, {MAX_DIM}]")
        mats = [self.objective] + [c.a for c in self.constraints]
        mats += [s.a for s in self.square_bounds if s.a is not None]
        for mat in mats:
            mat = np.asarray(mat)
            if mat.shape != (d, d):
                raise ValueError(f"coefficient matrix has shape {mat.shape}, expected {(d, d)}")
            if not np.allclose(mat, mat.conj().T, rtol=0, atol=1e-12 * max(1.0, np.abs(mat).max())):
                raise ValueError("coefficient matrices must be Hermitian")
        for c in self.constraints:
            if c.sense not in SENSES:
                raise ValueError(f"bad constraint sense {c.sense!r}")
        for i, j, _ in self.fixed_entries:
            if not (0 <= i < d and 0 <= j < d):
                raise ValueError("fixed entry index out of range")


@dataclass
class ConeSolution:
    x: np.ndarray | None
    objective_value: float
    status: str  # optimal | infeasible | numerical_failure
    solver_tolerance: float
    aux: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0
    backend: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


# ---------------------------------------------------------------------------
# Hermitian parametrization


@lru_cache(maxsize=None)
def _upper_pairs(d: int) -> tuple[np.ndarray, np.ndarray]:
    iu, ju = np.triu_indices(d, 1)
    return iu, ju


def herm_coeffs(a: np.ndarray) -> np.ndarray:
    """Coefficients c with ``Re Tr(a X) = c . x`` for the real parameters x of X."""
    a = np.asarray(a)
    iu, ju = _upper_pairs(a.shape[0])
    return np.concatenate([np.diag(a).real, 2 * a[iu, ju].real, 2 * a[iu, ju].imag])


def herm_from_params(x: np.ndarray, d: int) -> np.ndarray:
    iu, ju = _upper_pairs(d)
    k = len(iu)
    X = np.zeros((d, d), dtype=complex)
    X[np.diag_indices(d)] = x[:d]
    X[iu, ju] = x[d:d + k] + 1j * x[d + k:]
    X[ju, iu] = np.conj(X[iu, ju])
    return X


@lru_cache(maxsize=None)
def _embedding_operator(d: int) -> np.ndarray:
    """Matrix mapping params x to column-major vec of the real embedding (2d)^2."""
    n = 2 * d
    cols = []
    for idx in range(d * d):
        e = np.zeros(d * d)
        e[idx] = 1.0
        X = herm_from_params(e, d)
        emb = np.block([[X.real, -X.imag], [X.imag, X.real]])
        cols.append(emb.reshape(n * n, order="F"))
    return np.array(cols).T


def real_embedding(X: np.ndarray) -> np.ndarray:
    return np.block([[X.real, -X.imag], [X.imag, X.real]])


# ---------------------------------------------------------------------------
# SDP


def _normalize(row: np.ndarray, rhs: float) -> tuple[np.ndarray, float]:
    nrm = np.linalg.norm(row)
    if nrm == 0:
        return row, rhs
    return row / nrm, rhs / nrm


def solve_sdp(p: ConicProblem, *, scale=None, tol: float = DEFAULT_TOL,
              max_iters: int = 100, backend: str | None = None) -> ConeSolution:
    """Solve a :class:`ConicProblem`.

    ``scale`` is an optional positive d-vector s; the solver then works with
    ``X' = S^-1 X S^-1`` (S = diag(s)), which keeps badly scaled programs
    inside the interior-point method's comfort zone. The returned X is in the
    original units.

    ``backend`` is a backend name or a sequence tried in order until one
    verifies; the default runs Clarabel first and falls back to cvxopt.
    Callers must handle the ``infeasible`` and ``numerical_failure`` statuses.
    """
    p.check()
    d, k = p.dim, p.n_aux
    s = np.ones(d) if scale is None else np.asarray(scale, dtype=float)
    if s.shape != (d,) or np.any(s <= 0):
        raise ValueError("scale must be a positive vector of length dim")
    S = np.outer(s, s)

    def coeffs(a):
        return herm_coeffs(np.asarray(a) * S)

    nx = d * d
    nvar = nx + k

    def full_row(a, aux):
        row = np.zeros(nvar)
        if a is not None:
            row[:nx] = coeffs(a)
        if aux is not None and k:
            row[nx:] = aux
        return row

    # objective: minimize -(...)
    c = -full_row(p.objective, p.objective_aux)
    cnorm = np.linalg.norm(c)
    c_scaled = c / cnorm if cnorm > 0 else c

    lp_rows, lp_rhs, eq_rows, eq_rhs = [], [], [], []
    for con in p.constraints:
        row = full_row(con.a, con.aux)
        if not np.any(row):
            ok = {"<=": 0 <= con.rhs + 1e-15, ">=": 0 >= con.rhs - 1e-15, "=": abs(con.rhs) <= 1e-15}
            if not ok[con.sense]:
                return ConeSolution(None, np.nan, "infeasible", tol)
            continue
        if con.sense == "=":
            r, b = _normalize(row, con.rhs)
            eq_rows.append(r)
            eq_rhs.append(b)
        else:
            sign = 1.0 if con.sense == "<=" else -1.0
            r, b = _normalize(sign * row, sign * con.rhs)
            lp_rows.append(r)
            lp_rhs.append(b)
    iu, ju = _upper_pairs(d)
    pos = {(i, i): [i] for i in range(d)}
    for t, (i, j) in enumerate(zip(iu, ju)):
        pos[(i, j)] = [d + t, d + len(iu) + t]
    for i, j, value in p.fixed_entries:
        value = complex(value)
        if i > j:
            i, j, value = j, i, value.conjugate()
        value = value / (s[i] * s[j])
        idx = pos[(i, j)]
        targets = [value.real] if i == j else [value.real, value.imag]
        for ix, tv in zip(idx, targets):
            row = np.zeros(nvar)
            row[ix] = 1.0
            eq_rows.append(row)
            eq_rhs.append(tv)

    # rotated cones: u^2 <= v  <=>  ||(2 c u, v - c^2)|| <= v + c^2 for any c > 0
    soc_blocks = []
    for sb in p.square_bounds:
        u_row = full_row(None, sb.g)
        v_row = full_row(sb.a, sb.a_aux)
        cc = max(abs(float(sb.ref)), 1e-12)
        # cone vector s = h - G z = [v + c^2, 2 c u, v - c^2]
        G = -np.array([v_row, 2 * cc * u_row, v_row])
        h = np.array([sb.a0 + cc * cc, 2 * cc * sb.g0, sb.a0 - cc * cc])
        nrm = max(np.abs(G).max(), np.abs(h).max(), 1e-300)
        soc_blocks.append((G / nrm, h / nrm))

    emb = _embedding_operator(d)
    G_psd = -np.hstack([emb, np.zeros((emb.shape[0], k))])
    lp = np.array(lp_rows).reshape(-1, nvar), np.array(lp_rhs, dtype=float)
    eq = np.array(eq_rows).reshape(-1, nvar), np.array(eq_rhs, dtype=float)
    chain = BACKENDS if backend is None else ((backend,) if isinstance(backend, str) else tuple(backend))
    sol = None
    for name in chain:
        runner = _RUNNERS.get(name)
        if runner is None:
            raise ValueError(f"unknown backend {name!r}")
        status, z, iters = runner(c_scaled, lp, eq, soc_blocks, G_psd, 2 * d, tol, max_iters)
        sol = _finish(p, status, z, iters, S, tol)
        sol.backend = name
        if sol.ok:
            break
    return sol


def _finish(p: ConicProblem, status, z, iters, S, tol) -> ConeSolution:
    if status != "optimal":
        return ConeSolution(None, np.nan, status, tol, iterations=iters)
    d, nx = p.dim, p.dim * p.dim
    Xw = herm_from_params(z[:nx], d)
    lam, vec = np.linalg.eigh(Xw)
    if lam[0] < 0:
        # interior-point iterates can sit marginally outside the cone; project back
        Xw = (vec * np.maximum(lam, 0.0)) @ vec.conj().T
    X = Xw * S
    y = z[nx:]
    value = float(np.real(np.sum(p.objective * X.T)))
    if p.n_aux and p.objective_aux is not None:
        value += float(np.dot(p.objective_aux, y))
    sol = ConeSolution(X, value, "optimal", tol, y, iters)
    if not _verify(p, sol):
        sol.status = "numerical_failure"
    return sol


def _run_cvxopt(c, lp, eq, soc_blocks, G_psd, n_psd, tol, max_iters):
    G = np.vstack([lp[0]] + [g for g, _ in soc_blocks] + [G_psd])
    h = np.concatenate([lp[1]] + [hh for _, hh in soc_blocks] + [np.zeros(G_psd.shape[0])])
    dims = {"l": len(lp[1]), "q": [3] * len(soc_blocks), "s": [n_psd]}
    args = [matrix(c), matrix(G), matrix(h), dims]
    if len(eq[1]):
        args += [matrix(eq[0]), matrix(eq[1])]
    opts = {"show_progress": False, "abstol": tol * 1e-2, "reltol": tol,
            "feastol": tol * 1e-1, "maxiters": max_iters}
    try:
        res = solvers.conelp(*args, options=opts)
    except (ValueError, ArithmeticError, ZeroDivisionError):
        return "numerical_failure", None, 0
    status = res["status"]
    iters = int(res.get("iterations", 0))
    if status == "primal infeasible":
        return "infeasible", None, iters
    if res["x"] is None:
        return "numerical_failure", None, iters
    if status != "optimal":
        # accept near-optimal stalls, reject anything else
        gap = res.get("relative gap")
        pinf, dinf = res.get("primal infeasibility"), res.get("dual infeasibility")
        if gap is None or pinf is None or dinf is None or max(abs(gap), pinf, dinf) > 1e-6:
            return "numerical_failure", None, iters
    return "optimal", np.array(res["x"]).ravel(), iters


@lru_cache(maxsize=None)
def _svec_selector(n: int) -> np.ndarray:
    """Rows picking the scaled upper triangle (column-wise, off-diagonals * sqrt 2)
    out of a column-major vec of an n x n symmetric matrix."""
    rows = []
    for j in range(n):
        for i in range(j + 1):
            r = np.zeros(n * n)
            r[i + j * n] = 1.0 if i == j else np.sqrt(2.0)
            rows.append(r)
    return np.array(rows)


def _run_clarabel(c, lp, eq, soc_blocks, G_psd, n_psd, tol, max_iters):
    blocks, rhs, cones = [], [], []
    if len(eq[1]):
        blocks.append(eq[0])
        rhs.append(eq[1])
        cones.append(clarabel.ZeroConeT(len(eq[1])))
    if len(lp[1]):
        blocks.append(lp[0])
        rhs.append(lp[1])
        cones.append(clarabel.NonnegativeConeT(len(lp[1])))
    for g, hh in soc_blocks:
        blocks.append(g)
        rhs.append(hh)
        cones.append(clarabel.SecondOrderConeT(3))
    blocks.append(_svec_selector(n_psd) @ G_psd)
    rhs.append(np.zeros(n_psd * (n_psd + 1) // 2))
    cones.append(clarabel.PSDTriangleConeT(n_psd))
    A = sparse.csc_matrix(np.vstack(blocks))
    b = np.concatenate(rhs)
    nvar = len(c)
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iters
    settings.tol_gap_abs = tol * 1e-2
    settings.tol_gap_rel = tol
    settings.tol_feas = tol * 1e-1
    solver = clarabel.DefaultSolver(sparse.csc_matrix((nvar, nvar)), np.asarray(c, float), A, b, cones,
                                    settings)
    res = solver.solve()
    status = str(res.status)
    iters = int(res.iterations)
    if status in ("Solved", "AlmostSolved"):
        return "optimal", np.array(res.x), iters
    if "PrimalInfeasible" in status:
        return "infeasible", None, iters
    return "numerical_failure", None, iters


_RUNNERS = {"clarabel": _run_clarabel, "cvxopt": _run_cvxopt}


def _verify(p: ConicProblem, sol: ConeSolution, rel: float = 1e-6) -> bool:
    X, y = sol.x, sol.aux
    lam = np.linalg.eigvalsh(X)
    if lam[0] < -1e-7 * max(1.0, lam[-1]):
        return False
    for con in p.constraints:
        prod = con.a * X.T
        lhs = float(np.real(np.sum(prod)))
        # size of the individual terms, so cancelling constraints get a sensible tolerance
        mag = float(np.sum(np.abs(prod)))
        if con.aux is not None and len(y):
            lhs += float(np.dot(con.aux, y))
            mag += float(np.abs(con.aux) @ np.abs(y))
        tol_scale = rel * max(abs(con.rhs), mag, 1e-300)
        if con.sense == "<=" and lhs > con.rhs + tol_scale:
            return False
        if con.sense == ">=" and lhs < con.rhs - tol_scale:
            return False
        if con.sense == "=" and abs(lhs - con.rhs) > tol_scale:
            return False
    return True


# ---------------------------------------------------------------------------
# 2-D QP


@dataclass
class QP2D:
    """maximize ``0.5 x^T H x + b^T x`` s.t. ``A x <= c``, box, optional disk.

    ``ball`` = (center, radius) adds ``||x - center|| <= radius``; it is only
    supported for isotropic ``H = -k I`` (the objective is then a scaled
    negative squared distance and the disk face has a closed form).
    """

    H: np.ndarray
    b: np.ndarray
    A: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    c: np.ndarray = field(default_factory=lambda: np.zeros(0))
    box: tuple[np.ndarray, np.ndarray] | None = None
    ball: tuple[np.ndarray, float] | None = None

    def objective(self, x) -> float:
        x = np.asarray(x, float)
        return float(0.5 * x @ self.H @ x + self.b @ x)


def _all_halfplanes(q: QP2D) -> tuple[np.ndarray, np.ndarray]:
    A = [np.atleast_2d(np.asarray(q.A, float)).reshape(-1, 2)]
    c = [np.asarray(q.c, float).ravel()]
    if q.box is not None:
        lo, hi = (np.asarray(v, float) for v in q.box)
        A.append(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]))
        c.append(np.array([hi[0], hi[1], -lo[0], -lo[1]]))
    A, c = np.vstack(A), np.concatenate(c)
    nrm = np.linalg.norm(A, axis=1)
    keep = nrm > 0
    if np.any(~keep & (c < 0)):
        raise InfeasibleError("a zero-normal constraint with negative bound")
    return A[keep] / nrm[keep, None], c[keep] / nrm[keep]


def solve_qp2d(q: QP2D, *, feas_tol: float = 1e-10) -> np.ndarray:
    """Exact maximizer by enumeration of candidate active sets."""
    H = np.asarray(q.H, float)
    b = np.asarray(q.b, float)
    if np.any(np.linalg.eigvalsh(0.5 * (H + H.T)) >= 0):
        raise ValueError("H must be negative definite")
    A, c = _all_halfplanes(q)
    # per-row tolerance so one far-away (near-degenerate) row cannot loosen the others
    row_tol = feas_tol * (1.0 + np.abs(c))
    ball = None
    if q.ball is not None:
        center, radius = np.asarray(q.ball[0], float), float(q.ball[1])
        if not np.allclose(H, H[0, 0] * np.eye(2), rtol=1e-12, atol=0):
            raise ValueError("ball constraints need an isotropic H")
        if radius < 0:
            raise InfeasibleError("negative ball radius")
        ball = (center, radius)

    x0 = np.linalg.solve(H, -b)
    cands = [x0[None, :]]
    m = len(A)
    if m:
        # single active constraint: KKT system [[H, a], [a^T, 0]]
        K = np.zeros((m, 3, 3))
        K[:, :2, :2] = H
        K[:, :2, 2] = A
        K[:, 2, :2] = A
        rhs = np.column_stack([np.broadcast_to(-b, (m, 2)), c])
        cands.append(np.linalg.solve(K, rhs[..., None])[:, :2, 0])
    if m > 1:
        i, j = np.triu_indices(m, 1)
        det = A[i, 0] * A[j, 1] - A[i, 1] * A[j, 0]
        ok = np.abs(det) > 1e-14
        i, j, det = i[ok], j[ok], det[ok]
        vx = (c[i] * A[j, 1] - c[j] * A[i, 1]) / det
        vy = (A[i, 0] * c[j] - A[j, 0] * c[i]) / det
        cands.append(np.column_stack([vx, vy]))
    if ball is not None:
        center, r = ball
        v = x0 - center  # unconstrained optimum; objective ~ -dist^2 to it
        nv = np.linalg.norm(v)
        cands.append((center + (r * v / nv if nv > 0 else np.array([r, 0.0])))[None, :])
        if m:
            dist = c - A @ center
            on = np.abs(dist) <= r
            foot = center + dist[on, None] * A[on]
            half = np.sqrt(np.maximum(r * r - dist[on] ** 2, 0.0))[:, None]
            tang = np.column_stack([-A[on, 1], A[on, 0]])
            cands += [foot + half * tang, foot - half * tang]
    X = np.vstack(cands)
    good = np.all(np.isfinite(X), axis=1)
    if m:
        good &= np.all(X @ A.T - c <= row_tol, axis=1)
    if ball is not None:
        good &= np.linalg.norm(X - ball[0], axis=1) <= ball[1] + feas_tol * (1.0 + ball[1])
    if not np.any(good):
        raise InfeasibleError("empty feasible region")
    X = X[good]
    vals = 0.5 * np.einsum("ki,ij,kj->k", X, H, X) + X @ b
    return X[int(np.argmax(vals))].copy()
