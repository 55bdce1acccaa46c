"""Lifted first-order cuts for polyhedral excluded regions.

Anchoring a tangent inequality at a point y on facet i and lifting it by a
coefficient t >= 0 gives

    q >= 2 y.x - ||y||^2 + 2 t (a_i.x - b_i),

whose violated epigraph points fill the open ball centered at y + t*a_i with
radius t*||a_i||. The cut stays valid exactly while that ball stays inside
the region, and the largest admissible t is the minimum over the other
facets of an affine function of y. Separation therefore reduces to one small
convex QP per facet.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import solvers
from .errors import LiftingTooLarge, NotOnFacet, SameFacetPair
from .model import (
    Ball,
    Cut,
    FromLiftedAnchor,
    FromLinearization,
    Polyhedron,
    SeparationReport,
    linearization_cut,
)

ON_FACET_TOL = 1e-8
PARALLEL_TOL = 1e-12
LIFT_GUARD = 1e-8


def lifting_bound(
    poly: Polyhedron, i: int, j: int
) -> tuple[np.ndarray, float] | None:
    """Affine bound (lin, const) with max lift <= lin.y + const from facet j.

    Derived from the tangency condition: the grown ball's distance to facet
    j's hyperplane must cover its radius. Returns None when facet j can
    never bind (its normal is a positive multiple of facet i's), in which
    case the pair imposes no bound at all.
    """
    if i == j:
        raise SameFacetPair("pairwise bound needs two distinct facets")
    a_i, a_j = poly.normals[i], poly.normals[j]
    b_j = poly.offsets[j]
    denom = float(np.linalg.norm(a_i) * np.linalg.norm(a_j) - a_j @ a_i)
    if denom <= PARALLEL_TOL:
        return None
    return a_j / denom, float(-b_j / denom)


def max_lifting(poly: Polyhedron, anchor: np.ndarray, i: int) -> float:
    """Largest admissible lifting coefficient at an anchor on facet i.

    The anchor must lie on facet i and inside the region (both checked to
    1e-8). Returns +inf when no other facet ever binds.
    """
    y = np.asarray(anchor, dtype=float)
    vals = poly.facet_values(y)
    if abs(vals[i]) > ON_FACET_TOL * (1.0 + abs(poly.offsets[i])):
        raise NotOnFacet(f"anchor is off facet {i} by {vals[i]:.3e}")
    if np.min(vals) < -ON_FACET_TOL:
        raise NotOnFacet("anchor lies outside the region")
    best = np.inf
    for j in range(poly.n_facets):
        if j == i:
            continue
        bound = lifting_bound(poly, i, j)
        if bound is None:
            continue
        lin, const = bound
        best = min(best, float(lin @ y) + const)
    return best


def lifted_cut(poly: Polyhedron, anchor: np.ndarray, i: int, lift: float) -> Cut:
    """Cut q >= 2 y.x - ||y||^2 + 2*lift*(a_i.x - b_i) anchored at y on facet i."""
    y = np.asarray(anchor, dtype=float)
    if lift < -LIFT_GUARD:
        raise ValueError("lift must be nonnegative")
    limit = max_lifting(poly, y, i)
    if lift > limit + LIFT_GUARD:
        raise LiftingTooLarge(
            f"lift {lift:.6g} exceeds the admissible maximum {limit:.6g}"
        )
    a_i, b_i = poly.normals[i], float(poly.offsets[i])
    coeff = y + lift * a_i
    offset = float(-(y @ y) - 2.0 * lift * b_i)
    return Cut(
        1.0, coeff, offset, provenance=FromLiftedAnchor(y, i, float(lift))
    )


@dataclass(eq=False)
class FacetGeometry:
    """Pairwise wedge geometry of a polyhedron, computed once and shared.

    For each ordered non-parallel pair (i, j) we store both routes to the
    lifting bound: the affine distance form (bound_lin, bound_const) used by
    the optimizer, and the trigonometric form built from the wedge half-angle
    together with the in-facet direction toward facet j's side, the foot of
    the origin on facet plane i, and the foot of that point on the common
    ridge plane. The two must agree on facet i; tests enforce it.
    """

    poly: Polyhedron
    bound_lin: dict = field(default_factory=dict)
    bound_const: dict = field(default_factory=dict)
    tangent: dict = field(default_factory=dict)  # unit in-facet direction
    half_angle: dict = field(default_factory=dict)
    origin_foot: dict = field(default_factory=dict)  # per facet
    ridge_foot: dict = field(default_factory=dict)  # per ordered pair

    def __post_init__(self):
        poly = self.poly
        m = poly.n_facets
        for i in range(m):
            a_i = poly.normals[i]
            self.origin_foot[i] = (poly.offsets[i] / float(a_i @ a_i)) * a_i
        for i in range(m):
            a_i = poly.normals[i]
            for j in range(m):
                if i == j:
                    continue
                bound = lifting_bound(poly, i, j)
                if bound is None:
                    continue
                a_j = poly.normals[j]
                t = a_j - (float(a_j @ a_i) / float(a_i @ a_i)) * a_i
                nrm = np.linalg.norm(t)
                if nrm <= 1e-14:
                    continue  # opposite-parallel pair: distance form only
                self.bound_lin[(i, j)] = bound[0]
                self.bound_const[(i, j)] = bound[1]
                t = t / nrm
                self.tangent[(i, j)] = t
                u = a_i - (float(a_i @ a_j) / float(a_j @ a_j)) * a_j
                u = u / np.linalg.norm(u)
                cos_two = float(np.clip(t @ u, -1.0, 1.0))
                self.half_angle[(i, j)] = 0.5 * float(np.arccos(cos_two))
                A2 = np.vstack([a_i, a_j])
                rhs = np.array([poly.offsets[i], poly.offsets[j]])
                o_i = self.origin_foot[i]
                self.ridge_foot[(i, j)] = o_i - A2.T @ np.linalg.solve(
                    A2 @ A2.T, A2 @ o_i - rhs
                )

    def affine_bound(self, i: int, j: int, y: np.ndarray) -> float | None:
        key = (i, j)
        bound = lifting_bound(self.poly, i, j)
        if bound is None:
            return None
        lin, const = bound
        return float(lin @ np.asarray(y, dtype=float)) + const

    def angular_bound(self, i: int, j: int, y: np.ndarray) -> float | None:
        """Same bound via the wedge half-angle; None for parallel pairs."""
        key = (i, j)
        if key not in self.tangent:
            return None
        t = self.tangent[key]
        phi = self.half_angle[key]
        a_i = self.poly.normals[i]
        rel = np.asarray(y, dtype=float) - self.ridge_foot[key] + self.origin_foot[i]
        return float(np.tan(phi) / np.linalg.norm(a_i) * (t @ rel))


def facet_point(poly: Polyhedron, i: int) -> np.ndarray | None:
    """A point on facet i strictly inside every other facet, or None."""
    m, d = poly.normals.shape
    others = [j for j in range(m) if j != i]
    row_norms = np.linalg.norm(poly.normals, axis=1)
    span = 50.0 * (
        1.0 + float(np.max(np.abs(poly.offsets) / row_norms, initial=0.0))
    )
    C = np.zeros((len(others) + 2 * d + 1, d + 1))
    c = np.zeros(len(others) + 2 * d + 1)
    for k, j in enumerate(others):
        C[k, :d] = poly.normals[j]
        C[k, d] = -row_norms[j]
        c[k] = poly.offsets[j]
    C[len(others) : len(others) + d, :d] = np.eye(d)
    c[len(others) : len(others) + d] = -span
    C[len(others) + d : len(others) + 2 * d, :d] = -np.eye(d)
    c[len(others) + d : len(others) + 2 * d] = -span
    C[-1, d] = -1.0
    c[-1] = -span
    g = np.zeros(d + 1)
    g[d] = -1.0
    problem = solvers.QpProblem(
        H=np.zeros((d + 1, d + 1)),
        g=g,
        eq_mat=np.concatenate([poly.normals[i], [0.0]])[None, :],
        eq_vec=np.array([poly.offsets[i]]),
        ineq_mat=C,
        ineq_vec=c,
    )
    sol = solvers.solve_qp(problem)
    if sol.status != solvers.SolveStatus.OPTIMAL or float(sol.z[d]) <= 1e-9:
        return None
    return sol.z[:d]


def _facet_subproblem(
    poly: Polyhedron, i: int, x_star: np.ndarray, q_star: float
) -> tuple[Cut, float, solvers.SolveOutcome] | str:
    """Best lifted cut anchored on facet i, or a status string on failure.

    Variables are (y, t). Minimizing ||y||^2 - 2 y.x* - 2 t (a_i.x* - b_i)
    over y on the facet, y in the region, and t within every pairwise bound
    maximizes the violation at (x*, q*).
    """
    m, d = poly.normals.shape
    a_i, b_i = poly.normals[i], float(poly.offsets[i])
    n = d + 1
    H = np.zeros((n, n))
    H[:d, :d] = 2.0 * np.eye(d)
    g = np.zeros(n)
    g[:d] = -2.0 * x_star
    g[d] = -2.0 * (float(a_i @ x_star) - b_i)

    rows = [np.concatenate([np.zeros(d), [1.0]])]  # t >= 0
    rhs = [0.0]
    for j in range(m):
        if j == i:
            continue
        rows.append(np.concatenate([poly.normals[j], [0.0]]))
        rhs.append(poly.offsets[j])
        bound = lifting_bound(poly, i, j)
        if bound is not None:
            lin, const = bound
            rows.append(np.concatenate([lin, [-1.0]]))
            rhs.append(-const)
    problem = solvers.QpProblem(
        H=H,
        g=g,
        eq_mat=np.concatenate([a_i, [0.0]])[None, :],
        eq_vec=np.array([b_i]),
        ineq_mat=np.vstack(rows),
        ineq_vec=np.array(rhs),
    )
    out = solvers.solve_qp(problem)
    if out.status == solvers.SolveStatus.UNBOUNDED:
        return "unbounded"
    if out.status == solvers.SolveStatus.INFEASIBLE:
        return "infeasible"
    if out.status != solvers.SolveStatus.OPTIMAL:
        return "iteration_limit"
    y, t = out.z[:d], max(0.0, float(out.z[d]))
    coeff = y + t * a_i
    offset = float(-(y @ y) - 2.0 * t * b_i)
    cut = Cut(1.0, coeff, offset, provenance=FromLiftedAnchor(y, i, t))
    violation = -out.objective - q_star
    return cut, float(violation), out


def separate_polyhedron(
    poly: Polyhedron,
    x_star: np.ndarray,
    q_star: float,
    threads: int = 1,
) -> SeparationReport:
    """Most violated lifted first-order cut at the query point.

    Solves one anchor-and-lift QP per facet, keeps the best (ties broken by
    the lowest facet index), and also considers the plain tangent cut at x*
    whenever x* is outside the region's interior. A nonpositive violation
    means the query is not separated by this family.
    """
    x_star = np.asarray(x_star, dtype=float)
    results: dict[int, tuple[Cut, float, solvers.SolveOutcome] | str] = {}

    def run(i: int):
        results[i] = _facet_subproblem(poly, i, x_star, q_star)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, range(poly.n_facets)))
    else:
        for i in range(poly.n_facets):
            run(i)

    best_cut = None
    best_violation = -np.inf
    best_facet = None
    best_outcome = None
    skipped = {}
    for i in range(poly.n_facets):
        res = results[i]
        if isinstance(res, str):
            skipped[i] = res
            continue
        cut, violation, outcome = res
        if violation > best_violation + 1e-15:
            best_cut, best_violation, best_facet, best_outcome = (
                cut,
                violation,
                i,
                outcome,
            )

    if not poly.strictly_inside(x_star):
        lin_cut = linearization_cut(x_star)
        lin_violation = float(x_star @ x_star) - q_star
        if lin_violation > best_violation:
            best_cut, best_violation, best_facet = lin_cut, lin_violation, None
            best_outcome = None

    certificate = None
    if best_cut is not None:
        certificate = best_cut.violating_ball()
        if certificate is None and isinstance(
            best_cut.provenance, (FromLiftedAnchor, FromLinearization)
        ):
            certificate = Ball(best_cut.x_coeff, 0.0)
    diagnostics = {
        "facet": best_facet,
        "skipped": skipped,
        "iterations": best_outcome.iterations if best_outcome else 0,
        "kkt": best_outcome.kkt if best_outcome else None,
    }
    return SeparationReport(
        query_x=x_star,
        query_q=q_star,
        cut=best_cut,
        violation=float(best_violation),
        certificate=certificate,
        diagnostics=diagnostics,
    )
