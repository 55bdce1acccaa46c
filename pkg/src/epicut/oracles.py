"""Independent geometric verification oracles.

Every oracle here deliberately avoids the computational shortcuts used by the
cut constructors: containment is tested by per-facet distances or multistart
search, lifting limits by bisection, and cut validity by sampling the
complement region directly. Agreement between the two routes is what the test
suite certifies.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import solvers
from .model import (
    Ball,
    Cut,
    Ellipsoid,
    ParaboloidComplement,
    Polyhedron,
    Region,
)

BISECTION_TOL = 1e-10
LIFT_CAP = 1e9
VALIDITY_SLACK = 1e-7


@dataclass(frozen=True, eq=False)
class ContainmentVerdict:
    contained: bool
    witness: np.ndarray | None = None  # a point of the ball outside the region
    margin: float | None = None


def check_ball_containment(
    region: Region, ball: Ball, n_starts: int = 64, seed: int = 7
) -> ContainmentVerdict:
    """Is the closed ball inside the region?

    Polyhedra use the exact per-facet distance test. Ellipsoids maximize the
    constraint over the sphere by projected gradient ascent from many starts
    (with a closed form when the quadratic is the identity), which keeps this
    path independent of the algebraic certificate machinery.
    """
    if isinstance(region, Polyhedron):
        r = ball.radius
        dists = region.facet_distances(ball.center)
        worst = int(np.argmin(dists))
        margin = float(dists[worst] - r)
        if margin >= 0.0:
            return ContainmentVerdict(True, margin=margin)
        a = region.normals[worst]
        witness = ball.center - r * a / np.linalg.norm(a)
        return ContainmentVerdict(False, witness=witness, margin=margin)
    if isinstance(region, Ellipsoid):
        return _ball_in_ellipsoid(region, ball, n_starts, seed)
    raise TypeError("ball containment is defined for polyhedra and ellipsoids")


def _ball_in_ellipsoid(
    ell: Ellipsoid, ball: Ball, n_starts: int, seed: int
) -> ContainmentVerdict:
    d = ell.dim
    r = ball.radius
    mu = ball.center
    if r == 0.0:
        val = ell.constraint_value(mu)
        return ContainmentVerdict(
            val <= 0.0, witness=None if val <= 0.0 else mu, margin=-val
        )
    ident = (
        np.max(np.abs(ell.matrix - np.eye(d)), initial=0.0) <= 1e-12
    )
    if ident:
        # g(x) = ||x - lin||^2 + offset - ||lin||^2; max on the sphere is radial
        dist = float(np.linalg.norm(mu - ell.lin))
        best = (dist + r) ** 2 + ell.offset - float(ell.lin @ ell.lin)
        u = (mu - ell.lin) / dist if dist > 0 else _unit_starts(d, 1, seed)[0]
        witness = mu + r * u
    else:
        # maximize the convex quadratic on the sphere surface
        A = ell.matrix
        lin_term = 2.0 * r * (A @ mu - ell.lin)
        step = 1.0 / (2.0 * r * r * float(np.max(ell.eigvals)) + 1e-12)
        starts = _unit_starts(d, n_starts, seed, extra=ell.eigvecs)
        best = -np.inf
        witness = None
        for u in starts:
            for _ in range(300):
                grad = 2.0 * r * r * (A @ u) + lin_term
                nxt = u + step * grad
                nrm = np.linalg.norm(nxt)
                if nrm == 0.0:
                    break
                nxt /= nrm
                if np.linalg.norm(nxt - u) < 1e-13:
                    u = nxt
                    break
                u = nxt
            val = ell.constraint_value(mu + r * u)
            if val > best:
                best = val
                witness = mu + r * u
    if best <= 0.0:
        return ContainmentVerdict(True, margin=-best)
    return ContainmentVerdict(False, witness=witness, margin=-best)


def _unit_starts(
    d: int, n: int, seed: int, extra: np.ndarray | None = None
) -> np.ndarray:
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, d))
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    if extra is not None:
        pts = np.vstack([pts, extra.T, -extra.T])
    return pts


def brute_force_lifting(
    poly: Polyhedron,
    anchor: np.ndarray,
    facet: int,
    restrict_to: list[int] | None = None,
) -> float:
    """Largest lift along facet `facet`'s normal keeping the grown ball inside.

    Bisection on the exact distance test; the ball for lift t is centered at
    anchor + t*a_i with radius t*||a_i||. Returns +inf when the cap 1e9 still
    fits. `restrict_to` limits the facets that must contain the ball, which
    lets tests isolate a single pairwise bound.
    """
    y = np.asarray(anchor, dtype=float)
    a_i = poly.normals[facet]
    norm_i = float(np.linalg.norm(a_i))
    rows = (
        [j for j in range(poly.n_facets) if j != facet]
        if restrict_to is None
        else list(restrict_to)
    )
    if not rows:
        return np.inf
    normals = poly.normals[rows]
    offsets = poly.offsets[rows]
    row_norms = np.linalg.norm(normals, axis=1)

    def fits(t: float) -> bool:
        mu = y + t * a_i
        return bool(np.all((normals @ mu - offsets) / row_norms >= t * norm_i))

    if not fits(0.0):
        return 0.0
    hi = 1.0
    while fits(hi):
        hi *= 2.0
        if hi >= LIFT_CAP:
            return np.inf
    lo = hi / 2.0 if hi > 1.0 else 0.0
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if fits(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# --- cut validity ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ValidityVerdict:
    valid: bool
    counterexample: tuple | None = None  # (x, q) or (x, w, q)
    worst_residual: float = np.inf
    samples_used: int = 0


def _complement_samples_polyhedron(
    poly: Polyhedron, radius: float, budget: int, rng: np.random.Generator
) -> np.ndarray:
    d = poly.dim
    pts = []
    z0 = poly.interior_point
    if z0 is None:
        z0 = np.zeros(d)
    n_boundary = budget // 2
    # boundary points: cast rays from the interior witness and stop at exit
    dirs = rng.normal(size=(n_boundary, d))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    for u in dirs:
        den = poly.normals @ u
        num = poly.offsets - poly.normals @ z0
        ts = [num[k] / den[k] for k in range(poly.n_facets) if den[k] < -1e-14]
        if not ts:
            continue
        t_exit = min(t for t in ts if t > 0) if any(t > 0 for t in ts) else None
        if t_exit is not None and np.isfinite(t_exit):
            pts.append(z0 + t_exit * u)
    # free samples in a box, rejecting the open interior
    n_free = budget - len(pts)
    raw = rng.uniform(-radius, radius, size=(2 * n_free + 16, d))
    inside = (raw @ poly.normals.T - poly.offsets) > 0.0
    keep = raw[~np.all(inside, axis=1)][:n_free]
    if keep.size:
        pts.append(keep)
        return np.vstack([np.atleast_2d(p) for p in pts])
    return np.array(pts) if pts else np.zeros((0, d))


def _complement_samples_ellipsoid(
    ell: Ellipsoid, radius: float, budget: int, rng: np.random.Generator
) -> np.ndarray:
    d = ell.dim
    center = ell.center if ell.bounded else np.zeros(d)
    pts = []
    n_boundary = budget // 2
    dirs = rng.normal(size=(n_boundary, d))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    for u in dirs:
        # boundary crossing of g(center + t u) = 0: quadratic in t
        a = float(u @ ell.matrix @ u)
        b_lin = 2.0 * float(u @ (ell.matrix @ center - ell.lin))
        c0 = ell.constraint_value(center)
        disc = b_lin * b_lin - 4.0 * a * c0
        if a <= 0 or disc < 0:
            continue
        t = (-b_lin + np.sqrt(disc)) / (2.0 * a)
        pts.append(center + t * u)
    n_free = budget - len(pts)
    raw = center + rng.uniform(-radius, radius, size=(2 * n_free + 16, d))
    vals = np.einsum("ij,jk,ik->i", raw, ell.matrix, raw) - 2.0 * raw @ ell.lin
    keep = raw[vals + ell.offset >= 0.0][:n_free]
    if keep.size:
        pts.append(keep)
        return np.vstack([np.atleast_2d(p) for p in pts])
    return np.array(pts) if pts else np.zeros((0, d))


def _poke_candidates_polyhedron(poly: Polyhedron, cut: Cut) -> list[np.ndarray]:
    """Deterministic deepest-violation probes from the cut's own ball geometry."""
    ball = cut.violating_ball()
    if ball is None:
        return []
    r = ball.radius
    dists = poly.facet_distances(ball.center)
    out = []
    for j in range(poly.n_facets):
        if dists[j] < r:
            u = poly.normals[j] / np.linalg.norm(poly.normals[j])
            depth = 0.5 * (max(dists[j], -r) + r)
            out.append(ball.center - depth * u)
    return out


def _poke_candidates_ellipsoid(ell: Ellipsoid, cut: Cut) -> list[np.ndarray]:
    ball = cut.violating_ball()
    if ball is None:
        return []
    verdict = _ball_in_ellipsoid(ell, ball, n_starts=64, seed=11)
    if verdict.contained or verdict.witness is None:
        return []
    u = verdict.witness - ball.center
    nrm = np.linalg.norm(u)
    if nrm == 0:
        return []
    u /= nrm
    # walk inward from the sphere surface until back inside the region
    out = []
    for frac in (0.999, 0.99, 0.9, 0.75, 0.5):
        out.append(ball.center + frac * ball.radius * u)
    return out


def check_cut_validity(
    region: Region,
    cut,
    budget: int = 10_000,
    seed: int = 0,
    slack: float = VALIDITY_SLACK,
) -> ValidityVerdict:
    """Sample the complement of the region's interior and test the cut.

    Half the budget is spent on boundary points, the rest on box rejection
    samples; 100 long-ray probes guard the behavior at infinity. A
    counterexample is re-verified before being reported. Deterministic probes
    derived from the violated-point geometry are added so that barely-invalid
    cuts are caught without luck.
    """
    rng = np.random.default_rng(seed)
    if isinstance(region, ParaboloidComplement):
        return _check_paraboloid_cut(region, cut, budget, rng, slack)

    if isinstance(region, Polyhedron):
        anchor_scale = float(
            np.max(np.abs(region.offsets) / np.linalg.norm(region.normals, axis=1),
                   initial=0.0)
        )
        if region.interior_point is not None:
            anchor_scale = max(
                anchor_scale, float(np.max(np.abs(region.interior_point)))
            )
        radius = 10.0 * (1.0 + anchor_scale)
        pts = _complement_samples_polyhedron(region, radius, budget, rng)
        pokes = _poke_candidates_polyhedron(region, cut)
        outside = lambda x: not region.strictly_inside(x)
    else:
        radius = 10.0 * (1.0 + np.sqrt(max(region.sq_span, 0.0) / np.min(region.eigvals)))
        pts = _complement_samples_ellipsoid(region, radius, budget, rng)
        pokes = _poke_candidates_ellipsoid(region, cut)
        outside = lambda x: not region.strictly_inside(x)

    # 100 ray-limit probes at large radius
    d = pts.shape[1] if pts.size else cut.x_coeff.shape[0]
    far_dirs = rng.normal(size=(100, d))
    far_dirs /= np.linalg.norm(far_dirs, axis=1)[:, None]
    far = far_dirs * (1e6 * radius)
    all_pts = [pts] if pts.size else []
    all_pts.append(far)
    if pokes:
        all_pts.append(np.vstack(pokes))
    pts = np.vstack(all_pts)

    worst = np.inf
    counterexample = None
    used = 0
    for x in pts:
        if not outside(x):
            continue
        used += 1
        q = float(x @ x)
        res = cut.residual(x, q)
        if res < worst:
            worst = res
            if res < -slack:
                # independent re-check before claiming a counterexample
                if outside(x) and cut.residual(x, float(x @ x)) < -slack:
                    counterexample = (np.array(x), q)
    return ValidityVerdict(
        valid=counterexample is None,
        counterexample=counterexample,
        worst_residual=float(worst),
        samples_used=used,
    )


def _check_paraboloid_cut(
    region: ParaboloidComplement, cut, budget: int, rng, slack: float
) -> ValidityVerdict:
    """Validity over {(x, w) : w <= floor(x)} with q = ||x||^2.

    The cut residual decreases in w whenever the w coefficient is nonnegative,
    so the binding samples sit on the boundary w = floor(x); interior and
    limit checks are still exercised. Deterministic probes use the per-pair
    margin of the cut's violating paraboloid.
    """
    d = region.dim
    span = 1.0 + float(np.max(np.abs(region.offsets), initial=0.0))
    radius = 10.0 * span
    n_half = budget // 2
    xs = rng.uniform(-radius, radius, size=(n_half, d))
    floors = np.max(xs @ region.normals.T - region.offsets, axis=1)
    boundary = np.column_stack([xs, floors])
    xs2 = rng.uniform(-radius, radius, size=(budget - n_half, d))
    floors2 = np.max(xs2 @ region.normals.T - region.offsets, axis=1)
    ws2 = floors2 - rng.uniform(0.0, 10.0 * span, size=xs2.shape[0])
    interior = np.column_stack([xs2, ws2])
    pts = np.vstack([boundary, interior])

    # limit behavior: w -> -inf is safe iff the w coefficient is nonnegative
    if cut.w_coeff < -1e-12:
        x0 = np.zeros(d)
        w0 = region.floor(x0) - 1e8 * span
        return ValidityVerdict(
            valid=False,
            counterexample=(x0, w0, float(x0 @ x0)),
            worst_residual=-np.inf,
            samples_used=1,
        )

    pokes = []
    if cut.w_coeff > 1e-12:
        i = cut.anchor_facet
        a_i = region.normals[i]
        for j in range(region.n_facets):
            if j == i:
                continue
            a_j = region.normals[j]
            diff = a_i - a_j
            denom = float(diff @ diff)
            if denom <= 1e-12:
                continue
            x_j = cut.anchor - 0.5 * cut.w_coeff * diff
            rim = (
                float(a_i @ x_j)
                - region.offsets[i]
                + float((x_j - cut.anchor) @ (x_j - cut.anchor)) / cut.w_coeff
            )
            floor_j = float(a_j @ x_j) - region.offsets[j]
            if floor_j > rim:
                w_mid = 0.5 * (rim + floor_j)
                pokes.append(np.concatenate([x_j, [w_mid]]))

    if pokes:
        pts = np.vstack([pts, np.vstack(pokes)])
    worst = np.inf
    counterexample = None
    used = 0
    for row in pts:
        x, w = row[:d], float(row[d])
        if region.strictly_inside(x, w):
            continue
        used += 1
        q = float(x @ x)
        res = cut.residual(x, w, q)
        if res < worst:
            worst = res
            if res < -slack and not region.strictly_inside(x, w):
                counterexample = (np.array(x), w, q)
    return ValidityVerdict(
        valid=counterexample is None,
        counterexample=counterexample,
        worst_residual=float(worst),
        samples_used=used,
    )


# --- redundancy ------------------------------------------------------------


def check_irredundancy(poly: Polyhedron, gap: float = 1e-8) -> list[bool]:
    """For each facet, is there a point on it strictly inside all others?

    Solves a max-slack program per facet; True means facet-defining.
    """
    out = []
    m, d = poly.normals.shape
    row_norms = np.linalg.norm(poly.normals, axis=1)
    span = 50.0 * (
        1.0 + float(np.max(np.abs(poly.offsets) / row_norms, initial=0.0))
    )
    for i in range(m):
        others = [j for j in range(m) if j != i]
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
        out.append(
            sol.status == solvers.SolveStatus.OPTIMAL and float(sol.z[d]) > gap
        )
    return out


# --- curvature probing ------------------------------------------------------


@dataclass(frozen=True)
class CurvatureReport:
    concave: bool
    max_second_difference: float
    violation_index: int | None = None


def probe_concavity(f, grid: np.ndarray, slack: float = 1e-6) -> CurvatureReport:
    """Check discrete concavity of f on a grid of points.

    Uses divided second differences, so mildly nonuniform grids are fine.
    Positive second differences beyond `slack` flag a violation; probing
    convexity is the same call on -f.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size < 3:
        raise ValueError("need at least three grid points")
    vals = np.array([f(t) for t in grid], dtype=float)
    h1 = np.diff(grid[:-1])
    h2 = np.diff(grid[1:])
    slopes = np.diff(vals) / np.diff(grid)
    second = np.diff(slopes) * (0.5 * (h1 + h2))
    worst = int(np.argmax(second))
    max_second = float(second[worst])
    if max_second > slack:
        return CurvatureReport(False, max_second, worst + 1)
    return CurvatureReport(True, max_second, None)
