"""Ball cuts for ellipsoidal excluded regions.

Containment of a ball B(mu, sqrt(rho)) in {x : x'Ax - 2c'x + b <= 0} is
certified algebraically: with A = U diag(lam) U' and v = U'(c - A mu), the
ball fits iff

    sup over tau >= lam_max of  -sum_j v_j^2/(tau - lam_j)
                                - mu'A mu + 2c'mu - b - rho*tau  >=  0.

The supremand is strictly concave in tau, so a guarded Newton solve gives the
margin to high accuracy. For separation the best cut of squared radius rho
comes from the nearest admissible center to the query (a jointly convex
problem handled in solvers.solve_fixed_rho), and the best radius maximizes a
concave value function, found by golden-section search.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import solvers
from .errors import UnboundedEllipsoid
from .model import (
    Ball,
    Cut,
    Ellipsoid,
    SeparationReport,
    ball_cut,
    linearization_cut,
)

TAU_TOL = 1e-10
RHO_REL_TOL = 1e-9
BRACKET_REL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ContainmentCertificate:
    """Data certifying the sign of the containment margin.

    multiplier is the optimal tau; defect is U'(c - A mu); aux_bounds are the
    tight values v_j^2/(tau - lam_j); slack is the certified margin. Checking
    the certificate needs only these numbers and the region's eigenvalues.
    """

    multiplier: float
    defect: np.ndarray
    aux_bounds: np.ndarray
    slack: float


def _require_bounded(ell: Ellipsoid):
    if not ell.bounded:
        raise UnboundedEllipsoid("inscribed-ball machinery needs a bounded region")


def _margin_tau(
    lam: np.ndarray, v_sq: np.ndarray, quad: float, rho: float
) -> tuple[float, float]:
    """Maximize h(tau) = -sum v^2/(tau-lam) + quad - rho*tau over tau >= lam_max.

    Returns (margin, argmax tau). Strict concavity makes the derivative
    monotone; Newton from the right of the root converges monotonically after
    one bracketing flip. Boundary and zero-radius limits are handled exactly.
    """
    lam_max = float(np.max(lam))
    active = v_sq > 0.0
    if rho == 0.0:
        return quad, np.inf
    if not np.any(active):
        return quad - rho * lam_max, lam_max
    pole = float(np.max(lam[active]))

    def h(tau: float) -> float:
        return float(-np.sum(v_sq[active] / (tau - lam[active])) + quad - rho * tau)

    def dh(tau: float) -> float:
        return float(np.sum(v_sq[active] / (tau - lam[active]) ** 2) - rho)

    if pole < lam_max - 1e-15 and dh(lam_max) <= 0.0:
        return h(lam_max), lam_max
    lo = max(pole, lam_max)
    # dh <= 0 right of the root; floor keeps tau strictly above the pole even
    # when v is pure round-off and the sqrt underflows below float spacing.
    start = np.sqrt(float(np.sum(v_sq[active])) / rho)
    tau = lo + max(start, 1e-14 * (1.0 + abs(lo)))
    for _ in range(200):
        d1 = dh(tau)
        d2 = float(-2.0 * np.sum(v_sq[active] / (tau - lam[active]) ** 3))
        if d2 == 0.0:
            break
        step = d1 / d2
        nxt = tau - step
        if nxt <= lo:
            nxt = 0.5 * (tau + lo)
        if abs(nxt - tau) <= TAU_TOL * max(1.0, abs(tau)):
            tau = nxt
            break
        tau = nxt
    return h(tau), tau


def containment_margin(
    ell: Ellipsoid, ball: Ball
) -> tuple[float, ContainmentCertificate]:
    """Signed margin of B inside the region; >= 0 exactly when contained."""
    _require_bounded(ell)
    lam = ell.eigvals
    U = ell.eigvecs
    mu = ball.center
    A_mu = ell.matrix @ mu
    v = U.T @ (ell.lin - A_mu)
    quad = float(-mu @ A_mu + 2.0 * ell.lin @ mu - ell.offset)
    margin, tau = _margin_tau(lam, v**2, quad, float(ball.sq_radius))
    if np.isfinite(tau):
        denom = tau - lam
        aux = np.where(v**2 > 0.0, v**2 / np.where(denom == 0.0, 1.0, denom), 0.0)
    else:
        aux = np.zeros_like(v)
    return margin, ContainmentCertificate(
        multiplier=float(tau), defect=v, aux_bounds=aux, slack=float(margin)
    )


@dataclass(eq=False)
class FixedRadiusResult:
    feasible: bool
    value: float  # violation achievable with this squared radius
    center: np.ndarray | None = None
    certificate: ContainmentCertificate | None = None
    outcome: solvers.SolveOutcome | None = None


def fixed_rho_separate(
    ell: Ellipsoid,
    x_star: np.ndarray,
    q_star: float,
    rho: float,
    init: np.ndarray | None = None,
) -> FixedRadiusResult:
    """Best ball cut of squared radius rho at the query point.

    The achievable violation is rho - ||x* - mu||^2 - q* + ||x*||^2 at the
    nearest admissible center mu; infeasible radii yield value -inf.
    """
    _require_bounded(ell)
    x_star = np.asarray(x_star, dtype=float)
    out = solvers.solve_fixed_rho(ell, x_star, rho, init=init)
    if out.status == solvers.SolveStatus.INFEASIBLE:
        return FixedRadiusResult(feasible=False, value=-np.inf)
    mu = out.z[: x_star.size]
    value = float(
        rho - np.sum((x_star - mu) ** 2) - q_star + float(x_star @ x_star)
    )
    _, cert = containment_margin(ell, Ball(mu, rho))
    return FixedRadiusResult(
        feasible=True, value=value, center=mu, certificate=cert, outcome=out
    )


def max_inscribed_sq_radius(ell: Ellipsoid) -> float:
    """Largest squared radius of any inscribed ball, by bisection.

    Bisects on feasibility of the fixed-radius subproblem to relative
    tolerance 1e-9. For a solid region this equals the squared shortest
    semi-axis.
    """
    _require_bounded(ell)
    center = ell.center

    def feasible(rho: float) -> bool:
        out = solvers.solve_fixed_rho(ell, center, rho, feasibility_only=True)
        return out.status == solvers.SolveStatus.OPTIMAL

    hi = ell.sq_span / float(np.min(ell.eigvals)) + 1.0
    lo = 0.0
    if not feasible(lo):
        return 0.0
    if feasible(hi):
        return hi
    while hi - lo > RHO_REL_TOL * max(hi, 1.0):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def separate_ellipsoid(
    ell: Ellipsoid, x_star: np.ndarray, q_star: float
) -> SeparationReport:
    """Most violated ball cut at the query point.

    The violation as a function of the squared radius is concave on
    [0, rho_max], so a golden-section search with warm-started inner solves
    finds the best radius; the zero-radius endpoint reduces to the tangent
    cut at the projection of x* onto the region. The plain tangent cut at x*
    itself competes whenever x* is outside the interior.
    """
    _require_bounded(ell)
    x_star = np.asarray(x_star, dtype=float)
    rho_max = max_inscribed_sq_radius(ell)
    state = {"init": None, "solves": 0}

    cache: dict[float, FixedRadiusResult] = {}

    def theta(rho: float) -> float:
        if rho in cache:
            return cache[rho].value
        res = fixed_rho_separate(ell, x_star, q_star, rho, init=state["init"])
        state["solves"] += 1
        if res.feasible and res.outcome is not None:
            state["init"] = res.outcome.z
        cache[rho] = res
        return res.value

    rho_best, value_best, evals = solvers.golden_section_max(
        theta, 0.0, rho_max, BRACKET_REL_TOL * max(rho_max, 1e-300)
    )
    best = cache[rho_best]
    best_cut: Cut | None = None
    certificate = None
    if best.feasible and best.center is not None:
        best_cut = ball_cut(Ball(best.center, rho_best))
        certificate = best.certificate
    violation = value_best

    if not ell.strictly_inside(x_star):
        lin_violation = float(x_star @ x_star) - q_star
        if lin_violation > violation:
            best_cut = linearization_cut(x_star)
            violation = lin_violation
            certificate = None

    diagnostics = {
        "sq_radius": float(rho_best),
        "rho_max": float(rho_max),
        "golden_evals": evals,
        "inner_solves": state["solves"],
        "kkt": best.outcome.kkt if best.outcome is not None else None,
    }
    return SeparationReport(
        query_x=x_star,
        query_q=q_star,
        cut=best_cut,
        violation=float(violation),
        certificate=certificate,
        diagnostics=diagnostics,
    )
