"""Dense small-scale convex solvers.

Everything here is self-contained on purpose: the rest of the package needs
quadratic programs with a handful of variables and constraints, a
one-dimensional concave line search, and one structured barrier method.
Writing them directly keeps every numerical claim auditable and avoids a
generic conic-programming dependency.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .errors import SolverFailure

# Shared numerical thresholds.
FEAS_TOL = 1e-9
STAT_TOL = 1e-8
RANK_TOL = 1e-11
DEFAULT_ITERATION_CAP = 200

_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class KktResiduals:
    """Infinity-norm residuals of the first-order optimality system."""

    stationarity: float
    primal: float
    complementarity: float

    def max(self) -> float:
        return max(self.stationarity, self.primal, self.complementarity)


@dataclass(frozen=True, eq=False)
class QpProblem:
    """min 0.5 z'Hz + g'z  s.t.  eq_mat z = eq_vec,  ineq_mat z >= ineq_vec.

    H must be symmetric positive semidefinite; either constraint block may be
    empty (pass None).
    """

    H: np.ndarray
    g: np.ndarray
    eq_mat: np.ndarray | None = None
    eq_vec: np.ndarray | None = None
    ineq_mat: np.ndarray | None = None
    ineq_vec: np.ndarray | None = None

    def __post_init__(self):
        n = self.g.shape[0]
        if self.H.shape != (n, n):
            raise ValueError("H and g disagree on dimension")
        if np.max(np.abs(self.H - self.H.T), initial=0.0) > 1e-12 * (
            1.0 + np.max(np.abs(self.H), initial=0.0)
        ):
            raise ValueError("H must be symmetric")

    @property
    def n(self) -> int:
        return self.g.shape[0]

    def eq(self) -> tuple[np.ndarray, np.ndarray]:
        if self.eq_mat is None:
            return np.zeros((0, self.n)), np.zeros(0)
        return np.atleast_2d(np.asarray(self.eq_mat, dtype=float)), np.atleast_1d(
            np.asarray(self.eq_vec, dtype=float)
        )

    def ineq(self) -> tuple[np.ndarray, np.ndarray]:
        if self.ineq_mat is None:
            return np.zeros((0, self.n)), np.zeros(0)
        return np.atleast_2d(np.asarray(self.ineq_mat, dtype=float)), np.atleast_1d(
            np.asarray(self.ineq_vec, dtype=float)
        )

    def objective(self, z: np.ndarray) -> float:
        return float(0.5 * z @ self.H @ z + self.g @ z)


@dataclass
class SolveOutcome:
    """Result of a solver run, including enough data to audit it."""

    status: SolveStatus
    z: np.ndarray | None = None
    objective: float = np.nan
    eq_duals: np.ndarray | None = None
    ineq_duals: np.ndarray | None = None
    kkt: KktResiduals | None = None
    iterations: int = 0
    certificate: np.ndarray | None = None  # Farkas vector / unbounded ray


def golden_section_max(
    f: Callable[[float], float], lo: float, hi: float, tol: float
) -> tuple[float, float, int]:
    """Maximize a scalar unimodal function on [lo, hi].

    Returns (argmax, max, evaluation count). The bracket is shrunk until its
    width is at most tol; the best point ever evaluated is returned, which
    protects against mild non-unimodality near the optimum.
    """
    if hi < lo:
        raise ValueError("empty bracket")
    evals = 0
    best_x, best_f = lo, -np.inf

    def probe(x: float) -> float:
        nonlocal evals, best_x, best_f
        evals += 1
        v = f(x)
        if v > best_f:
            best_x, best_f = x, v
        return v

    a, b = lo, hi
    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)
    f1, f2 = probe(x1), probe(x2)
    while b - a > tol:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_PHI * (b - a)
            f1 = probe(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_PHI * (b - a)
            f2 = probe(x2)
    for x in (lo, hi, 0.5 * (a + b)):
        probe(x)
    return best_x, best_f, evals


def _nullspace(mat: np.ndarray, n: int) -> np.ndarray:
    """Orthonormal basis of the right null space of mat (rows may be dependent)."""
    if mat.shape[0] == 0:
        return np.eye(n)
    u, s, vt = np.linalg.svd(mat, full_matrices=True)
    cut = RANK_TOL * max(1.0, s[0] if s.size else 0.0)
    rank = int(np.sum(s > cut))
    return vt[rank:].T


def _multipliers(active_mat: np.ndarray, grad: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares duals for grad = active_mat' * duals."""
    if active_mat.shape[0] == 0:
        return np.zeros(0), float(np.max(np.abs(grad), initial=0.0))
    duals, *_ = np.linalg.lstsq(active_mat.T, grad, rcond=None)
    resid = float(np.max(np.abs(active_mat.T @ duals - grad), initial=0.0))
    return duals, resid


def _active_set_min(
    H: np.ndarray,
    g: np.ndarray,
    eq_mat: np.ndarray,
    eq_vec: np.ndarray,
    ineq_mat: np.ndarray,
    ineq_vec: np.ndarray,
    z0: np.ndarray,
    iteration_cap: int,
) -> SolveOutcome:
    """Primal active-set loop from a feasible start z0.

    Handles positive semidefinite H: zero-curvature directions with nonzero
    reduced gradient become descent rays, which either hit a blocking
    constraint or certify unboundedness.
    """
    n = g.shape[0]
    n_eq, n_in = eq_mat.shape[0], ineq_mat.shape[0]
    scale = 1.0 + max(
        np.max(np.abs(H), initial=0.0),
        np.max(np.abs(g), initial=0.0),
        np.max(np.abs(ineq_vec), initial=0.0),
    )
    z = z0.astype(float).copy()
    slack = ineq_mat @ z - ineq_vec if n_in else np.zeros(0)
    working = sorted(np.nonzero(slack <= FEAS_TOL * scale)[0].tolist())

    for iteration in range(1, iteration_cap + 1):
        grad = H @ z + g
        act = (
            np.vstack([eq_mat, ineq_mat[working]])
            if (n_eq or working)
            else np.zeros((0, n))
        )
        Z = _nullspace(act, n)

        step = np.zeros(n)
        is_ray = False
        if Z.shape[1]:
            Hr = Z.T @ H @ Z
            gr = Z.T @ grad
            w, V = np.linalg.eigh(Hr)
            curv_tol = 1e-10 * (1.0 + float(np.max(np.abs(w), initial=0.0)))
            pos = w > curv_tol
            flat_grad = V[:, ~pos].T @ gr
            if np.max(np.abs(flat_grad), initial=0.0) > 1e-10 * scale:
                # descent along zero curvature: a ray of the quadratic model
                direction = -V[:, ~pos] @ flat_grad
                direction = direction / np.linalg.norm(direction)
                step = Z @ direction
                is_ray = True
            elif np.any(pos):
                coef = (V[:, pos].T @ gr) / w[pos]
                step = -(Z @ (V[:, pos] @ coef))

        if not is_ray and np.max(np.abs(step), initial=0.0) <= 1e-11 * scale:
            duals, resid = _multipliers(act, grad)
            ineq_duals_w = duals[n_eq:]
            if ineq_duals_w.size and np.min(ineq_duals_w) < -1e-9 * scale:
                worst = int(np.argmin(ineq_duals_w))
                working.pop(worst)
                continue
            lam = np.zeros(n_in)
            for k, idx in enumerate(working):
                lam[idx] = max(0.0, float(ineq_duals_w[k]))
            slack = ineq_mat @ z - ineq_vec if n_in else np.zeros(0)
            kkt = KktResiduals(
                stationarity=resid,
                primal=float(max(np.max(-slack, initial=0.0), 0.0)),
                complementarity=float(np.max(np.abs(lam * slack), initial=0.0)),
            )
            return SolveOutcome(
                status=SolveStatus.OPTIMAL,
                z=z,
                objective=float(0.5 * z @ H @ z + g @ z),
                eq_duals=duals[:n_eq] if n_eq else np.zeros(0),
                ineq_duals=lam,
                kkt=kkt,
                iterations=iteration,
            )

        # largest feasible step along `step`
        limit = np.inf
        blocker = -1
        for i in range(n_in):
            if i in working:
                continue
            d = float(ineq_mat[i] @ step)
            if d < -1e-13 * scale:
                room = float(ineq_mat[i] @ z - ineq_vec[i])
                t = max(room, 0.0) / (-d)
                if t < limit - 1e-15:
                    limit, blocker = t, i

        if is_ray and np.isinf(limit):
            return SolveOutcome(
                status=SolveStatus.UNBOUNDED,
                z=z,
                objective=-np.inf,
                iterations=iteration,
                certificate=step,
            )
        target = np.inf if is_ray else 1.0
        if limit >= target:
            z = z + target * step
            continue
        z = z + limit * step
        working = sorted(set(working) | {blocker})

    return SolveOutcome(
        status=SolveStatus.ITERATION_LIMIT,
        z=z,
        objective=float(0.5 * z @ H @ z + g @ z),
        iterations=iteration_cap,
    )


def _phase1(
    eq_mat: np.ndarray,
    eq_vec: np.ndarray,
    ineq_mat: np.ndarray,
    ineq_vec: np.ndarray,
    iteration_cap: int,
) -> tuple[np.ndarray | None, np.ndarray | None, int]:
    """Elastic feasibility problem: minimize total inequality violation.

    Returns (feasible point, Farkas-type certificate, iterations). Exactly one
    of the first two is not None.
    """
    n = eq_mat.shape[1] if eq_mat.size else ineq_mat.shape[1]
    if eq_mat.shape[0]:
        z0, *_ = np.linalg.lstsq(eq_mat, eq_vec, rcond=None)
        eq_resid = np.max(np.abs(eq_mat @ z0 - eq_vec), initial=0.0)
        if eq_resid > FEAS_TOL * (1.0 + np.max(np.abs(eq_vec), initial=0.0)):
            return None, np.zeros(0), 0
    else:
        z0 = np.zeros(n)

    n_in = ineq_mat.shape[0]
    if n_in == 0:
        return z0, None, 0

    scale = 1.0 + max(
        np.max(np.abs(ineq_vec), initial=0.0), np.max(np.abs(ineq_mat), initial=0.0)
    )
    slack0 = ineq_mat @ z0 - ineq_vec
    if np.min(slack0, initial=0.0) >= -FEAS_TOL * scale:
        return z0, None, 0

    # variables (z, s): min sum(s) s.t. ineq_mat z + s >= ineq_vec, s >= 0
    n_tot = n + n_in
    H = np.zeros((n_tot, n_tot))
    g = np.concatenate([np.zeros(n), np.ones(n_in)])
    eq_big = (
        np.hstack([eq_mat, np.zeros((eq_mat.shape[0], n_in))])
        if eq_mat.shape[0]
        else np.zeros((0, n_tot))
    )
    C = np.vstack(
        [
            np.hstack([ineq_mat, np.eye(n_in)]),
            np.hstack([np.zeros((n_in, n)), np.eye(n_in)]),
        ]
    )
    c = np.concatenate([ineq_vec, np.zeros(n_in)])
    s0 = np.maximum(ineq_vec - ineq_mat @ z0, 0.0)
    start = np.concatenate([z0, s0])
    out = _active_set_min(H, g, eq_big, eq_vec, C, c, start, iteration_cap)
    if out.status not in (SolveStatus.OPTIMAL, SolveStatus.ITERATION_LIMIT):
        raise SolverFailure(f"phase-1 ended with {out.status}")
    total_violation = float(np.sum(out.z[n:]))
    if total_violation > 1e-8 * scale:
        cert = out.ineq_duals[:n_in] if out.ineq_duals is not None else None
        return None, cert, out.iterations
    return out.z[:n], None, out.iterations


def solve_qp(
    problem: QpProblem, iteration_cap: int = DEFAULT_ITERATION_CAP
) -> SolveOutcome:
    """Solve a convex QP by a primal active-set method.

    A phase-1 elastic problem finds a feasible start or an infeasibility
    certificate; phase 2 runs the active-set loop. On OPTIMAL the outcome
    carries duals and KKT residuals below 1e-8.
    """
    eq_mat, eq_vec = problem.eq()
    ineq_mat, ineq_vec = problem.ineq()
    z0, cert, p1_iters = _phase1(eq_mat, eq_vec, ineq_mat, ineq_vec, iteration_cap)
    if z0 is None:
        return SolveOutcome(
            status=SolveStatus.INFEASIBLE, iterations=p1_iters, certificate=cert
        )
    out = _active_set_min(
        problem.H, problem.g, eq_mat, eq_vec, ineq_mat, ineq_vec, z0, iteration_cap
    )
    out.iterations += p1_iters
    return out


def kkt_residuals(problem: QpProblem, outcome: SolveOutcome) -> KktResiduals:
    """Independent audit of a claimed optimum.

    Recomputes stationarity, primal feasibility and complementarity directly
    from the problem data, on a code path separate from the solver.
    """
    z = outcome.z
    eq_mat, eq_vec = problem.eq()
    ineq_mat, ineq_vec = problem.ineq()
    nu = outcome.eq_duals if outcome.eq_duals is not None else np.zeros(eq_mat.shape[0])
    lam = (
        outcome.ineq_duals
        if outcome.ineq_duals is not None
        else np.zeros(ineq_mat.shape[0])
    )
    grad = problem.H @ z + problem.g
    if eq_mat.shape[0]:
        grad = grad - eq_mat.T @ nu
    if ineq_mat.shape[0]:
        grad = grad - ineq_mat.T @ lam
    slack = ineq_mat @ z - ineq_vec if ineq_mat.shape[0] else np.zeros(0)
    eq_gap = eq_mat @ z - eq_vec if eq_mat.shape[0] else np.zeros(0)
    primal = max(
        float(np.max(-slack, initial=0.0)),
        float(np.max(np.abs(eq_gap), initial=0.0)),
        0.0,
    )
    if lam.size and np.min(lam) < -1e-9:
        primal = max(primal, float(-np.min(lam)))
    return KktResiduals(
        stationarity=float(np.max(np.abs(grad), initial=0.0)),
        primal=primal,
        complementarity=float(np.max(np.abs(lam * slack), initial=0.0))
        if lam.size
        else 0.0,
    )


# ---------------------------------------------------------------------------
# Inscribed-ball subproblem for ellipsoidal regions.
#
# For the region {x : x'Ax - 2c'x + b <= 0} with eigenpairs A = U diag(lam) U',
# the ball B(mu, sqrt(rho)) is contained iff there is tau >= lam_max with
#
#   g(mu, tau) = -sum_j v_j^2/(tau - lam_j) - mu'A mu + 2c'mu - b - rho*tau >= 0,
#   v = U'(c - A mu).
#
# g is jointly concave in (mu, tau) because each v_j^2/(tau - lam_j) is a
# convex quadratic-over-linear term. The nearest admissible center solves
#
#   min ||x* - mu||^2  s.t.  g(mu, tau) >= 0,
#
# which we treat with a log-barrier Newton method directly in (mu, tau).
# ---------------------------------------------------------------------------

BARRIER_WEIGHT_INIT = 1.0
BARRIER_WEIGHT_FACTOR = 0.2
BARRIER_STOP = 1e-10  # stop once weight * (1 + number of constraints) drops below


@dataclass
class _EllipsoidData:
    lam: np.ndarray
    U: np.ndarray
    lin: np.ndarray
    offset: float
    lam_max: float
    center: np.ndarray
    sq_span: float  # c'A^{-1}c - b, the constraint value depth at the center
    lam_t: tuple  # eigenvalues as python floats for the scalar tau loops


def _unpack_ellipsoid(ell) -> _EllipsoidData:
    lam = np.asarray(ell.eigvals, dtype=float)
    U = np.asarray(ell.eigvecs, dtype=float)
    lin = np.asarray(ell.lin, dtype=float)
    center = np.asarray(ell.center, dtype=float)
    return _EllipsoidData(
        lam=lam,
        U=U,
        lin=lin,
        offset=float(ell.offset),
        lam_max=float(np.max(lam)),
        center=center,
        sq_span=float(lin @ center - ell.offset),
        lam_t=tuple(float(v) for v in lam),
    )


def _g_value_grad_hess(
    data: _EllipsoidData, mu: np.ndarray, tau: float, rho: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Containment function g with gradient and Hessian in z = (mu, tau)."""
    lam, U = data.lam, data.U
    A_mu = U @ (lam * (U.T @ mu))
    v = U.T @ (data.lin - A_mu)
    d = tau - lam
    if np.any(d <= 0.0):
        bad = (d <= 0.0) & (v**2 > 0.0)
        if np.any(bad) or np.any(d < 0.0):
            return -np.inf, np.zeros(mu.size + 1), np.zeros((mu.size + 1, mu.size + 1))
        d = np.where(d == 0.0, 1.0, d)  # v is zero there; term vanishes
    quad = float(-mu @ A_mu + 2.0 * data.lin @ mu - data.offset)
    val = float(-np.sum(v**2 / d) + quad - rho * tau)

    n = mu.size
    AU = U * lam  # columns scaled: (A U) since A = U diag(lam) U'
    grad_mu = 2.0 * (U @ (lam * (v / d))) - 2.0 * A_mu + 2.0 * data.lin
    grad_tau = float(np.sum(v**2 / d**2) - rho)
    grad = np.concatenate([grad_mu, [grad_tau]])

    hess = np.zeros((n + 1, n + 1))
    M = U @ ((lam**2 / d)[:, None] * U.T)
    A_full = U @ (lam[:, None] * U.T)
    hess[:n, :n] = -2.0 * M - 2.0 * A_full
    cross = -2.0 * (U @ (lam * v / d**2))
    hess[:n, n] = cross
    hess[n, :n] = cross
    hess[n, n] = -2.0 * float(np.sum(v**2 / d**3))
    return val, grad, hess


def _g0_value_grad_hess(
    data: _EllipsoidData, mu: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Zero-radius case: g0(mu) = -(mu'A mu - 2c'mu + b), plain membership."""
    lam, U = data.lam, data.U
    A_mu = U @ (lam * (U.T @ mu))
    val = float(-(mu @ A_mu) + 2.0 * data.lin @ mu - data.offset)
    grad = -2.0 * A_mu + 2.0 * data.lin
    hess = -2.0 * (U @ (lam[:, None] * U.T))
    return val, grad, hess


def _best_tau_regime(
    data: _EllipsoidData,
    mu: np.ndarray,
    rho: float,
    hint: float | None = None,
    v: np.ndarray | None = None,
) -> tuple[float, bool, list]:
    """Argmax over tau of the containment slack g(mu, .) at a fixed center.

    g is strictly concave in tau right of the pole, so a guarded Newton from
    the right of the root of dg/dtau converges monotonically. The result is
    floored strictly above lam_max so it stays admissible for the barrier.
    The flag is True when the argmax is an interior stationary point and
    False when the slack is still decreasing at the pole, which happens
    exactly on the degenerate manifold where the top eigenspace carries no
    residual (there the maximized slack is nonsmooth in mu). Callers that
    already hold the eigenframe residual pass it as v to skip the matvecs.
    Also returns the active (v_j^2, lam_j) pairs so the caller can finish
    the slack value without touching numpy again.
    """
    if v is None:
        A_mu = data.U @ (data.lam * (data.U.T @ mu))
        v = data.U.T @ (data.lin - A_mu)
    pad = 1e-12 * (1.0 + abs(data.lam_max))
    # scalar loops: these run a handful of terms tens of thousands of times
    # per separation, where numpy dispatch would dominate the runtime
    pairs = []
    for vv, ll in zip(v.tolist(), data.lam_t):
        vv *= vv
        if vv > 0.0:
            pairs.append((vv, ll))
    if rho <= 0.0 or not pairs:
        return data.lam_max + pad, False, pairs
    pole = max(l for _, l in pairs)

    def derivs(tau: float) -> tuple[float, float]:
        d1 = -rho
        d2 = 0.0
        for vv, ll in pairs:
            r = tau - ll
            w = vv / (r * r)
            d1 += w
            d2 -= 2.0 * w / r
        return d1, d2

    lo_b = data.lam_max + pad
    if derivs(lo_b)[0] <= 0.0:
        # the slack is already decreasing at the admissible floor; this covers
        # both sub-top residual mass and a top residual of pure round-off size
        # (anything below sqrt(rho)*pad), which is the degenerate regime
        return data.lam_max + pad, False, pairs
    # dg/dtau is decreasing and convex right of the pole, so the root is
    # bracketed by the floor and pole + sqrt(sum v^2 / rho); Newton steps are
    # kept inside the bracket, falling back to bisection when they leave it
    hi_b = pole + float(np.sqrt(sum(vv for vv, _ in pairs) / rho))
    if hi_b <= lo_b:
        hi_b = lo_b + pad
    tau = hint if (hint is not None and lo_b < hint < hi_b) else hi_b
    for _ in range(200):
        d1, d2 = derivs(tau)
        if d1 > 0.0:
            lo_b = tau
        else:
            hi_b = tau
        if d2 == 0.0:
            break
        nxt = tau - d1 / d2
        if not lo_b < nxt < hi_b:
            nxt = 0.5 * (lo_b + hi_b)
        if abs(nxt - tau) <= 1e-13 * max(1.0, abs(tau)):
            tau = nxt
            break
        tau = nxt
    return max(tau, data.lam_max + pad), True, pairs


def _best_tau(data: _EllipsoidData, mu: np.ndarray, rho: float) -> float:
    return _best_tau_regime(data, mu, rho)[0]


def _h_parts(
    data: _EllipsoidData, mu: np.ndarray, rho: float, hint: float | None = None
) -> tuple[float, np.ndarray, np.ndarray, tuple | None, float]:
    """Maximized containment slack h(mu) = max_tau g(mu, tau) with derivatives.

    Interior regime (argmax strictly right of the pole): h is smooth there and
    the Hessian is the Schur complement of the tau block of the joint Hessian.
    Degenerate regime (argmax rides the pole): the top-eigenspace residuals
    are pure round-off, so they are zeroed and the model is restricted to the
    manifold they span; the returned basis holds the excluded eigenvectors so
    the caller can keep Newton steps tangent. Off-manifold, h grows like a
    concave cone, which no quadratic model represents.
    """
    lam, U = data.lam, data.U
    A_mu = U @ (lam * (U.T @ mu))
    v = U.T @ (data.lin - A_mu)
    tau, interior, _ = _best_tau_regime(data, mu, rho, hint, v=v)
    if interior:
        val, grad, hess = _g_value_grad_hess(data, mu, tau, rho)
        n = mu.size
        h_grad = grad[:n]
        cross = hess[:n, n]
        dtt = hess[n, n]
        h_hess = hess[:n, :n]
        if dtt < 0.0:
            h_hess = h_hess - np.outer(cross, cross) / dtt
        return val, h_grad, h_hess, None, tau
    top = lam >= data.lam_max - 1e-9 * (1.0 + abs(data.lam_max))
    v = np.where(top, 0.0, v)
    d = np.where(top, 1.0, data.lam_max - lam)
    quad = float(-mu @ A_mu + 2.0 * data.lin @ mu - data.offset)
    val = float(-np.sum(v**2 / d) + quad - rho * data.lam_max)
    grad = 2.0 * (U @ (lam * (v / d))) - 2.0 * A_mu + 2.0 * data.lin
    curv = np.where(top, 0.0, lam**2 / d)
    hess = -2.0 * (U @ (curv[:, None] * U.T)) - 2.0 * (U @ (lam[:, None] * U.T))
    return val, grad, hess, (U[:, top], U[:, ~top]), tau


def _kink_slope(data: _EllipsoidData, mu: np.ndarray, rho: float) -> float:
    """Transversal descent rate of the maximized slack on the kink manifold.

    Off-manifold the slack loses 2*lam_max*sqrt(rho - D0) per unit of
    transversal center motion, where D0 is the curvature mass the sub-top
    eigendirections already consume at the pole. The isotropic case has
    D0 = 0; using sqrt(rho) alone overstates the slope whenever the residual
    carries sub-top energy, which would let stationarity tests pass early.
    """
    lam, U = data.lam, data.U
    A_mu = U @ (lam * (U.T @ mu))
    v = U.T @ (data.lin - A_mu)
    top = lam >= data.lam_max - 1e-9 * (1.0 + abs(data.lam_max))
    gap = np.where(top, 1.0, data.lam_max - lam)
    d0 = float(np.sum(np.where(top, 0.0, v**2 / gap**2)))
    return 2.0 * data.lam_max * float(np.sqrt(max(rho - d0, 0.0)))


def _h_value(
    data: _EllipsoidData, mu: np.ndarray, rho: float, hint: float | None = None
) -> tuple[float, float]:
    # value-only path: line searches call this at every trial point, so the
    # gradient and Hessian assembly of the full evaluation is skipped and the
    # residual pairs are shared with the tau solve
    lam, U = data.lam, data.U
    A_mu = U @ (lam * (U.T @ mu))
    v = U.T @ (data.lin - A_mu)
    quad = float(-mu @ A_mu + 2.0 * data.lin @ mu - data.offset)
    tau, interior, pairs = _best_tau_regime(data, mu, rho, hint, v=v)
    if interior:
        acc = 0.0
        for vv, ll in pairs:
            acc += vv / (tau - ll)  # tau is floored strictly above lam_max
        return quad - rho * tau - acc, tau
    top_cut = data.lam_max - 1e-9 * (1.0 + abs(data.lam_max))
    acc = 0.0
    for vv, ll in pairs:
        if ll < top_cut:  # top-eigenspace residual is round-off, dropped
            acc += vv / (data.lam_max - ll)
    return quad - rho * data.lam_max - acc, tau


def _interior_outcome(
    data: _EllipsoidData,
    x_star: np.ndarray,
    mu: np.ndarray,
    rho: float,
    tau: float | None = None,
) -> SolveOutcome:
    """Exact outcome when the query point itself admits the inscribed ball."""
    z = np.concatenate([mu, [np.inf if tau is None else tau]])
    return SolveOutcome(
        status=SolveStatus.OPTIMAL,
        z=z,
        objective=float(np.sum((x_star - mu) ** 2)),
        ineq_duals=np.array([0.0]),
        kkt=KktResiduals(0.0, 0.0, 0.0),
        iterations=0,
    )


def _segment_start(data: _EllipsoidData, x_star: np.ndarray, rho: float) -> np.ndarray:
    """Interior barrier start between the region center and the query point.

    Pushed toward x* by bisection, stopping where the maximized containment
    slack falls to a quarter of its value at the center.
    """
    top = data.sq_span - rho * data.lam_max
    tau_hint: float | None = None

    def slack(mu: np.ndarray) -> float:
        nonlocal tau_hint
        if rho == 0.0:
            return _g0_value_grad_hess(data, mu)[0]
        val, tau_hint = _h_value(data, mu, rho, hint=tau_hint)
        return val

    d = x_star - data.center
    target = 0.25 * top
    if slack(x_star) >= target:
        return x_star
    # coarse bracket only: the quarter-slack target is itself a heuristic,
    # so resolving the segment parameter past 1e-2 buys nothing
    lo_s, hi_s = 0.0, 1.0
    while hi_s - lo_s > 1e-2:
        mid = 0.5 * (lo_s + hi_s)
        if slack(data.center + mid * d) >= target:
            lo_s = mid
        else:
            hi_s = mid
    return data.center + lo_s * d


def _kink_escape(
    data: _EllipsoidData,
    x_star: np.ndarray,
    mu: np.ndarray,
    rho: float,
    w: float,
    basis: np.ndarray,
    f_base: float,
    hval: float,
) -> np.ndarray | None:
    """Step off the degenerate manifold when that lowers the stage objective.

    The maximized slack falls like a concave cone transverse to the manifold
    (slope _kink_slope per unit of transversal motion), so Newton cannot
    propose the move; a geometric ray search along the query pull handles it
    with exact slack evaluations. Both the quadratic term and the barrier
    term have nondecreasing derivatives along the ray, so a nonnegative
    one-sided slope at the manifold rules the whole ray out.
    """
    pull = basis @ (basis.T @ (x_star - mu))
    norm = float(np.linalg.norm(pull))
    if norm <= 1e-14 * (1.0 + float(np.linalg.norm(x_star))):
        return None
    if -2.0 * norm + (w / hval) * _kink_slope(data, mu, rho) >= 0.0:
        return None
    u = pull / norm
    s = 0.5 * (1.0 + norm)
    for _ in range(40):
        cand = mu + s * u
        cval, _ = _h_value(data, cand, rho)
        if np.isfinite(cval) and cval > 0.0:
            f_c = float((cand - x_star) @ (cand - x_star)) - w * np.log(cval)
            if f_c < f_base - 1e-12 * (1.0 + abs(f_base)):
                return cand
        s *= 0.25
        if s <= 1e-12 * (1.0 + norm):
            break
    return None


def _schedule_weights() -> list[float]:
    weight = BARRIER_WEIGHT_INIT
    weights = []
    while True:
        weights.append(weight)
        if weight * 2.0 <= BARRIER_STOP:
            break
        weight *= BARRIER_WEIGHT_FACTOR
    return weights


def _barrier_newton_mu(
    data: _EllipsoidData,
    x_star: np.ndarray,
    mu0: np.ndarray,
    rho: float,
    iteration_cap: int,
    weights: list[float] | None = None,
) -> tuple[np.ndarray, int]:
    """Weighted barrier path over centers only, slack maximized out exactly.

    Runs the full weight schedule by default; a warm restart that is already
    near the path's end can pass just the final weight.
    """
    mu = mu0.copy()
    total_newton = 0
    if weights is None:
        weights = _schedule_weights()

    n = mu.size
    tau_hint: float | None = None
    top = data.lam >= data.lam_max - 1e-9 * (1.0 + abs(data.lam_max))
    u_top = data.U[:, top]
    for w in weights:
        for _ in range(iteration_cap):
            total_newton += 1
            hval, hgrad, hhess, basis, tau_hint = _h_parts(data, mu, rho, tau_hint)
            if not np.isfinite(hval) or hval <= 0.0:
                raise SolverFailure("barrier iterate left the feasible region")
            f_base = float((mu - x_star) @ (mu - x_star)) - w * np.log(hval)
            if basis is None and tau_hint - data.lam_max <= 1e-3 * (
                1.0 + abs(data.lam_max)
            ):
                # transverse curvature blows up like 1/distance approaching the
                # degenerate manifold, which turns Newton into a bisection
                # crawl; once close, land exactly on it if that does not hurt.
                # Both gates matter: the slack is only kinked where the optimal
                # tau rides the top eigenvalue, and a snap below the distance
                # floor is a no-op that would starve the stage of real steps
                t_comp = u_top.T @ (mu - data.center)
                scale = 1.0 + float(np.max(np.abs(mu)))
                if 1e-13 * scale < float(
                    np.max(np.abs(t_comp), initial=0.0)
                ) <= 1e-4 * scale:
                    snap = mu - u_top @ t_comp
                    sval, tau_hint = _h_value(data, snap, rho, tau_hint)
                    if np.isfinite(sval) and sval > 0.0:
                        f_s = float((snap - x_star) @ (snap - x_star)) - w * np.log(
                            sval
                        )
                        if f_s <= f_base + 1e-12 * (1.0 + abs(f_base)):
                            mu = snap
                            continue
            grad = 2.0 * (mu - x_star) - (w / hval) * hgrad
            hess = 2.0 * np.eye(n) - (w / hval) * hhess
            hess += (w / hval**2) * np.outer(hgrad, hgrad)
            hess[np.diag_indices_from(hess)] += 1e-12
            on_manifold = basis is not None
            if on_manifold and basis[1].shape[1] > 0:
                tang = basis[1]
                red = tang.T @ grad
                try:
                    y = -np.linalg.solve(tang.T @ hess @ tang, red)
                except np.linalg.LinAlgError:
                    y = -red
                step = tang @ y
                decrement = float(-red @ y)
            elif on_manifold:
                step = np.zeros(n)
                decrement = 0.0
            else:
                try:
                    step = -np.linalg.solve(hess, grad)
                except np.linalg.LinAlgError:
                    step = -grad
                decrement = float(-grad @ step)
            # stage centering only needs accuracy proportional to the weight;
            # the floor keeps the test meaningful at the last stages
            if decrement < max(1e-18 * (1.0 + abs(hval)), 1e-6 * w):
                if on_manifold:
                    jump = _kink_escape(
                        data, x_star, mu, rho, w, basis[0], f_base, hval
                    )
                    if jump is not None:
                        mu = jump
                        continue
                break
            t = 1.0
            moved = False
            for _ls in range(60):
                cand = mu + t * step
                cval, tau_hint = _h_value(data, cand, rho, tau_hint)
                if np.isfinite(cval) and cval > 0.0:
                    f_c = float((cand - x_star) @ (cand - x_star)) - w * np.log(cval)
                    if f_c <= f_base - 1e-4 * t * decrement:
                        moved = True
                        break
                t *= 0.5
            if moved and np.max(np.abs(t * step)) <= 1e-15 * (
                1.0 + np.max(np.abs(mu))
            ):
                moved = False
            if not moved:
                if on_manifold:
                    jump = _kink_escape(
                        data, x_star, mu, rho, w, basis[0], f_base, hval
                    )
                    if jump is not None:
                        mu = jump
                        continue
                break
            mu = mu + t * step
    return mu, total_newton


def _barrier_newton(
    x_star: np.ndarray,
    z0: np.ndarray,
    g_fun: Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]],
    tau_floor: float | None,
    iteration_cap: int,
) -> tuple[np.ndarray, int]:
    """Minimize ||x* - mu||^2 - weight*log g(z) along the decreasing-weight path."""
    n = x_star.size
    z = z0.copy()
    total_newton = 0
    weight = BARRIER_WEIGHT_INIT
    weights = []
    while True:
        weights.append(weight)
        if weight * 2.0 <= BARRIER_STOP:
            break
        weight *= BARRIER_WEIGHT_FACTOR

    for w in weights:
        for _ in range(iteration_cap):
            total_newton += 1
            gval, ggrad, ghess = g_fun(z)
            if not np.isfinite(gval) or gval <= 0.0:
                raise SolverFailure("barrier iterate left the feasible region")
            mu = z[:n]
            grad = np.zeros(z.size)
            grad[:n] = 2.0 * (mu - x_star)
            grad -= (w / gval) * ggrad
            hess = np.zeros((z.size, z.size))
            hess[:n, :n] = 2.0 * np.eye(n)
            hess -= (w / gval) * ghess
            hess += (w / gval**2) * np.outer(ggrad, ggrad)
            hess[np.diag_indices_from(hess)] += 1e-12
            try:
                step = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                step = -grad
            decrement = float(-grad @ step)
            # the stiff barrier direction divides evaluation noise out of the
            # decrement, so this is a reliable stop even at tiny weights
            if decrement < 1e-18 * (1.0 + abs(gval)):
                break
            t = 1.0
            base = float((mu - x_star) @ (mu - x_star)) - w * np.log(gval)
            for _ls in range(60):
                cand = z + t * step
                if tau_floor is None or cand[-1] > tau_floor:
                    cval, _, _ = g_fun(cand)
                    if np.isfinite(cval) and cval > 0.0:
                        mu_c = cand[:n]
                        f_c = float((mu_c - x_star) @ (mu_c - x_star)) - w * np.log(
                            cval
                        )
                        if f_c <= base - 1e-4 * t * decrement:
                            break
                t *= 0.5
            else:
                break  # no admissible step; weight done
            z_next = z + t * step
            if np.max(np.abs(z_next - z)) <= 1e-15 * (1.0 + np.max(np.abs(z))):
                # stage minimizer sits at the nonsmooth kink (center query on a
                # symmetry axis): the backtracked step is below float spacing,
                # so the stage cannot move and later, lighter weights take over
                z = z_next
                break
            z = z_next
    return z, total_newton


def _kkt_station(
    data: _EllipsoidData,
    mu: np.ndarray,
    x_star: np.ndarray,
    rho: float,
    hgrad: np.ndarray,
    basis: tuple | None,
) -> tuple[float, float]:
    """Multiplier fit and stationarity residual at a candidate center."""
    obj_grad = 2.0 * (mu - x_star)
    if rho > 0.0 and basis is not None:
        # optimum on the degenerate manifold: stationarity holds with a
        # subgradient whose transversal part may be anything up to the cone
        # slope, so fit the multiplier tangentially and charge only the excess
        u_top, tang = basis
        cone = _kink_slope(data, mu, rho)
        tg = tang.T @ hgrad
        to = tang.T @ obj_grad
        denom = float(tg @ tg)
        if denom > 0.0:
            multiplier = max(0.0, float(tg @ to) / denom)
            resid_t = float(np.max(np.abs(to - multiplier * tg)))
        else:
            multiplier = (
                float(np.linalg.norm(u_top.T @ obj_grad)) / cone if cone > 0 else 0.0
            )
            resid_t = 0.0
        perp = u_top.T @ (obj_grad - multiplier * hgrad)
        excess = max(
            0.0, float(np.linalg.norm(perp)) - multiplier * cone * (1.0 + 1e-7)
        )
        return multiplier, max(resid_t, excess)
    # least-squares multiplier: at a central-path point the objective
    # gradient is parallel to the constraint gradient, tiny residual
    denom = float(hgrad @ hgrad)
    multiplier = max(0.0, float(hgrad @ obj_grad) / denom) if denom > 0 else 0.0
    return multiplier, float(np.max(np.abs(obj_grad - multiplier * hgrad)))


def solve_fixed_rho(
    ell,
    x_star: np.ndarray,
    rho: float,
    init: np.ndarray | None = None,
    feasibility_only: bool = False,
    iteration_cap: int = 80,
) -> SolveOutcome:
    """Nearest center of an inscribed ball of squared radius rho.

    Minimizes ||x* - mu||^2 over centers mu whose ball of squared radius rho
    fits inside the ellipsoidal region. The certificate scalar tau is
    maximized out exactly inside every slack evaluation, so Newton runs over
    centers only and cannot crawl along the pole at lam_max. Infeasibility
    (no such ball) is decided up front: the maximized slack is concave with
    its optimum at the region's center, sup = sq_span - rho*lam_max. When x*
    itself admits the ball the answer is exact with a zero multiplier; the
    barrier path only runs in the binding regime.
    """
    data = _unpack_ellipsoid(ell)
    x_star = np.asarray(x_star, dtype=float)
    if np.min(data.lam) <= 1e-10:
        raise SolverFailure("inscribed-ball subproblem needs a bounded region")
    if rho < 0.0:
        raise ValueError("rho must be nonnegative")

    scale = 1.0 + abs(data.sq_span)
    sup_g = data.sq_span - rho * data.lam_max
    if sup_g < -1e-12 * scale:
        return SolveOutcome(status=SolveStatus.INFEASIBLE, iterations=0)
    if feasibility_only or sup_g <= 1e-12 * scale:
        z = np.concatenate([data.center, [data.lam_max]])
        return SolveOutcome(
            status=SolveStatus.OPTIMAL,
            z=z,
            objective=float(np.sum((x_star - data.center) ** 2)),
            iterations=0,
            kkt=KktResiduals(0.0, 0.0, 0.0),
        )

    if rho == 0.0:
        if _g0_value_grad_hess(data, x_star)[0] >= 0.0:
            return _interior_outcome(data, x_star, x_star, rho)
        mu0 = _segment_start(data, x_star, rho)
        if init is not None:
            cand = np.asarray(init, dtype=float)[: x_star.size]
            if _g0_value_grad_hess(data, cand)[0] > 0.0:
                mu0 = cand
        g_fun = lambda z: _g0_value_grad_hess(data, z)
        mu, iters = _barrier_newton(x_star, mu0, g_fun, None, iteration_cap)
        gval, hgrad, _ = _g0_value_grad_hess(data, mu)
        basis = None
    else:
        tau_x = _best_tau(data, x_star, rho)
        if _g_value_grad_hess(data, x_star, tau_x, rho)[0] >= 0.0:
            return _interior_outcome(data, x_star, x_star, rho, tau_x)
        warm = None
        if init is not None:
            cand = np.asarray(init, dtype=float)[: x_star.size]
            if _h_value(data, cand, rho)[0] > 0.0:
                warm = cand
            else:
                # restarts from a neighboring rho often land a hair outside
                # the (shrunken) admissible set; the region's center has the
                # maximal slack, so a short slide toward it recovers a warm
                # point at a handful of slack evaluations
                seg = data.center - cand
                for s in (0.02, 0.05, 0.12, 0.3, 0.6, 1.0):
                    probe = cand + s * seg
                    if _h_value(data, probe, rho)[0] > 0.0:
                        warm = probe
                        break
        mu = None
        iters = 0
        if warm is not None:
            # a feasible restart near the path's end (the usual case when
            # sweeping rho) only needs the final stage; accept it when the
            # polished point meets the endpoint optimality conditions, else
            # fall back to the full schedule from the same start. Points that
            # start visibly non-stationary never polish in time, so skip the
            # attempt for them instead of paying for it
            gval, hgrad, _, basis, _ = _h_parts(data, warm, rho)
            _, stat_0 = _kkt_station(data, warm, x_star, rho, hgrad, basis)
            scale_w = 1.0 + float(np.linalg.norm(warm - x_star))
            if stat_0 <= 1e-2 * scale_w:
                try:
                    mu_w, iters = _barrier_newton_mu(
                        data, x_star, warm, rho, 8, weights=[_schedule_weights()[-1]]
                    )
                    gval, hgrad, _, basis, _ = _h_parts(data, mu_w, rho)
                    _, stat_w = _kkt_station(data, mu_w, x_star, rho, hgrad, basis)
                    if stat_w <= 1e-9 * (
                        1.0 + float(np.linalg.norm(mu_w - x_star))
                    ):
                        mu = mu_w
                except SolverFailure:
                    mu = None
        if mu is None:
            mu0 = warm if warm is not None else _segment_start(data, x_star, rho)
            mu, it_full = _barrier_newton_mu(data, x_star, mu0, rho, iteration_cap)
            iters += it_full
            gval, hgrad, _, basis, _ = _h_parts(data, mu, rho)
    multiplier, stat_inf = _kkt_station(data, mu, x_star, rho, hgrad, basis)
    kkt = KktResiduals(
        stationarity=stat_inf,
        primal=float(max(-gval, 0.0)),
        complementarity=float(abs(multiplier * gval)),
    )
    out_z = np.concatenate([mu, [_best_tau(data, mu, rho) if rho > 0.0 else np.inf]])
    return SolveOutcome(
        status=SolveStatus.OPTIMAL,
        z=out_z,
        objective=float(np.sum((x_star - mu) ** 2)),
        ineq_duals=np.array([multiplier]),
        kkt=kkt,
        iterations=iters,
    )
