"""Cuts for the epigraph of ||x||^2 outside a piecewise-linear upper region.

The excluded region lives in (x, w) space as {(x, w) : a_i.x - w <= b_i for
all i}, i.e. everything above the max of affine maps. For an anchor x* on
facet i (meaning w* = a_i.x* - b_i dominates the other affine pieces), the
lifted inequality

    (2x* - t a_i).x + t w + t b_i - ||x*||^2 <= q

is tight at (x*, w*, ||x*||^2) and stays valid while the lift t does not
exceed the per-pair limit

    t_ij = 4 (a_i.x* - b_i - a_j.x* + b_j) / ||a_i - a_j||^2,

an affine function of the anchor. At the binding pair the inequality is also
tight at a second point on facet j, which pins the maximal lift.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import solvers
from .errors import (
    IdenticalNormals,
    LiftingTooLarge,
    NotInRelativeInterior,
    SameFacetPair,
)
from .model import FromParaboloidAnchor, ParaboloidComplement, SeparationReport

REL_INT_TOL = 1e-10
LIFT_GUARD = 1e-8


@dataclass(frozen=True, eq=False)
class ParaboloidCut:
    """Inequality x_lin.x + w_coeff*w + constant <= q in (x, w, q) space."""

    x_lin: np.ndarray
    w_coeff: float
    constant: float
    anchor: np.ndarray
    anchor_facet: int
    provenance: FromParaboloidAnchor | None = None

    def __post_init__(self):
        arr = np.asarray(self.x_lin, dtype=float).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "x_lin", arr)
        anc = np.asarray(self.anchor, dtype=float).copy()
        anc.setflags(write=False)
        object.__setattr__(self, "anchor", anc)

    def residual(self, x: np.ndarray, w: float, q: float) -> float:
        """Nonnegative on satisfied points."""
        x = np.asarray(x, dtype=float)
        return float(q - self.x_lin @ x - self.w_coeff * w - self.constant)

    def violation(self, x: np.ndarray, w: float, q: float) -> float:
        return -self.residual(x, w, q)


def transform_paraboloid_cut(record, cut: ParaboloidCut) -> ParaboloidCut:
    """Rewrite an original-coordinates cut in the transformed coordinates.

    Only the x block is remapped; the auxiliary w variable rides along
    unchanged, and the epigraph shift moves into the constant.
    """
    t_inv_s = np.linalg.solve(record.matrix, record.shift)
    return ParaboloidCut(
        x_lin=np.linalg.solve(record.matrix.T, cut.x_lin),
        w_coeff=cut.w_coeff,
        constant=cut.constant - record.q_offset - float(cut.x_lin @ t_inv_s),
        anchor=record.apply_point(cut.anchor),
        anchor_facet=cut.anchor_facet,
        provenance=cut.provenance,
    )


def restore_paraboloid_cut(record, cut: ParaboloidCut) -> ParaboloidCut:
    """Rewrite a transformed-coordinates cut in the original coordinates."""
    return ParaboloidCut(
        x_lin=record.matrix.T @ cut.x_lin,
        w_coeff=cut.w_coeff,
        constant=cut.constant + record.q_offset + float(cut.x_lin @ record.shift),
        anchor=record.invert_point(cut.anchor),
        anchor_facet=cut.anchor_facet,
        provenance=cut.provenance,
    )


def _on_facet_check(
    region: ParaboloidComplement, x_star: np.ndarray, i: int
) -> float:
    """w value of the anchor, after checking facet i strictly dominates."""
    vals = region.normals @ x_star - region.offsets
    w_star = float(vals[i])
    others = np.delete(vals, i)
    if others.size and float(np.max(others)) >= w_star - REL_INT_TOL:
        raise NotInRelativeInterior(
            f"facet {i} does not strictly dominate at the anchor"
        )
    return w_star


def lifting_limit(
    region: ParaboloidComplement, x_star: np.ndarray, i: int, j: int
) -> float:
    """Per-pair lifting limit t_ij at an anchor on facet i; affine in x*.

    Requires the anchor's floor value to come strictly from facet i (relative
    interior, tolerance 1e-10), which also makes every limit positive.
    """
    if i == j:
        raise SameFacetPair("pairwise limit needs two distinct facets")
    a_i, a_j = region.normals[i], region.normals[j]
    diff = a_i - a_j
    if float(np.linalg.norm(diff)) <= 1e-12:
        raise IdenticalNormals(f"facets {i} and {j} share a normal direction")
    x_star = np.asarray(x_star, dtype=float)
    _on_facet_check(region, x_star, i)
    num = float(a_i @ x_star) - region.offsets[i] - (
        float(a_j @ x_star) - region.offsets[j]
    )
    return 4.0 * num / float(diff @ diff)


def max_paraboloid_lifting(
    region: ParaboloidComplement, x_star: np.ndarray, i: int
) -> float:
    """Smallest per-pair limit over the other facets (with distinct normals)."""
    best = np.inf
    for j in range(region.n_facets):
        if j == i:
            continue
        try:
            best = min(best, lifting_limit(region, x_star, i, j))
        except IdenticalNormals:
            continue
    return best


def paraboloid_cut(
    region: ParaboloidComplement, x_star: np.ndarray, i: int, lift: float
) -> ParaboloidCut:
    """Lifted cut anchored at x* on facet i with lifting coefficient `lift`."""
    x_star = np.asarray(x_star, dtype=float)
    _on_facet_check(region, x_star, i)
    if lift < -LIFT_GUARD:
        raise ValueError("lift must be nonnegative")
    limit = max_paraboloid_lifting(region, x_star, i)
    if lift > limit + LIFT_GUARD:
        raise LiftingTooLarge(
            f"lift {lift:.6g} exceeds the admissible maximum {limit:.6g}"
        )
    a_i, b_i = region.normals[i], float(region.offsets[i])
    return ParaboloidCut(
        x_lin=2.0 * x_star - lift * a_i,
        w_coeff=float(lift),
        constant=float(lift * b_i - x_star @ x_star),
        anchor=x_star,
        anchor_facet=i,
        provenance=FromParaboloidAnchor(x_star, i, float(lift)),
    )


def _facet_subproblem(
    region: ParaboloidComplement,
    i: int,
    x_star: np.ndarray,
    w_star: float,
    q_star: float,
) -> tuple[ParaboloidCut, float, solvers.SolveOutcome] | str:
    """Optimal anchor y and lift t on facet i for the query (x*, w*, q*).

    Maximizing the violation (2y - t a_i).x* + t w* + t b_i - ||y||^2 - q*
    is the QP  min ||y||^2 - 2 y.x* + t (a_i.x* - w* - b_i)  subject to
    t >= 0 and t below every per-pair affine limit evaluated at y.
    """
    m, d = region.normals.shape
    a_i, b_i = region.normals[i], float(region.offsets[i])
    n = d + 1
    H = np.zeros((n, n))
    H[:d, :d] = 2.0 * np.eye(d)
    g = np.zeros(n)
    g[:d] = -2.0 * x_star
    g[d] = float(a_i @ x_star) - w_star - b_i

    rows = [np.concatenate([np.zeros(d), [1.0]])]
    rhs = [0.0]
    for j in range(m):
        if j == i:
            continue
        diff = a_i - region.normals[j]
        denom = float(diff @ diff)
        if denom <= 1e-12:
            # same normal: facet i exists only if its offset is not larger
            if region.offsets[j] < b_i - 1e-12:
                return "infeasible"
            continue
        # t <= 4((a_i - a_j).y - b_i + b_j)/||a_i - a_j||^2
        rows.append(np.concatenate([diff, [-denom / 4.0]]))
        rhs.append(b_i - float(region.offsets[j]))
    problem = solvers.QpProblem(
        H=H,
        g=g,
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
    cut = ParaboloidCut(
        x_lin=2.0 * y - t * a_i,
        w_coeff=t,
        constant=float(t * b_i - y @ y),
        anchor=y,
        anchor_facet=i,
        provenance=FromParaboloidAnchor(y, i, t),
    )
    violation = -out.objective - q_star
    return cut, float(violation), out


def separate_paraboloid(
    region: ParaboloidComplement,
    x_star: np.ndarray,
    w_star: float,
    q_star: float,
) -> SeparationReport:
    """Most violated lifted cut at (x*, w*, q*) over all anchor facets."""
    x_star = np.asarray(x_star, dtype=float)
    best_cut = None
    best_violation = -np.inf
    best_facet = None
    best_outcome = None
    skipped = {}
    for i in range(region.n_facets):
        res = _facet_subproblem(region, i, x_star, w_star, q_star)
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
    diagnostics = {
        "facet": best_facet,
        "skipped": skipped,
        "iterations": best_outcome.iterations if best_outcome else 0,
        "kkt": best_outcome.kkt if best_outcome else None,
    }
    return SeparationReport(
        query_x=x_star,
        query_q=q_star,
        query_w=w_star,
        cut=best_cut,
        violation=float(best_violation),
        certificate=best_cut.provenance if best_cut is not None else None,
        diagnostics=diagnostics,
    )
