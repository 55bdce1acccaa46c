"""Random fixtures: regions, quadratics, and queries for tests and the CLI.

Everything takes an explicit numpy Generator so runs are reproducible from a
single seed. Generated polyhedra carry their interior witness; generated
ellipsoids are bounded with moderate conditioning; paraboloid regions get
pairwise-distinct normals so every lifting limit is defined.
"""
from __future__ import annotations

import numpy as np

from .instances import Instance
from .model import (
    Ellipsoid,
    ParaboloidComplement,
    Polyhedron,
    QuadraticForm,
    Region,
)

PARALLEL_COS = 1.0 - 1e-6


def _unit_directions(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """n unit vectors, pairwise cosine below PARALLEL_COS."""
    rows: list[np.ndarray] = []
    while len(rows) < n:
        v = rng.normal(size=dim)
        nv = float(np.linalg.norm(v))
        if nv < 1e-9:
            continue
        u = v / nv
        if any(float(u @ w) > PARALLEL_COS for w in rows):
            continue
        rows.append(u)
    return np.array(rows)


def random_polyhedron(
    rng: np.random.Generator, dim: int = 2, n_facets: int = 5, scale: float = 1.0
) -> Polyhedron:
    """Nonempty-interior polyhedron {x : normals@x >= offsets} around a random center."""
    normals = _unit_directions(rng, n_facets, dim)
    center = rng.uniform(-scale, scale, size=dim)
    slacks = rng.uniform(0.2, 1.0, size=n_facets) * scale
    offsets = normals @ center - slacks
    return Polyhedron(normals, offsets, interior_point=center)


def random_ellipsoid(
    rng: np.random.Generator, dim: int = 2, scale: float = 1.0, cond: float = 4.0
) -> Ellipsoid:
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    eigs = rng.uniform(1.0 / cond, 1.0, size=dim)
    mat = q @ (eigs[:, None] * q.T)
    mat = 0.5 * (mat + mat.T)
    center = rng.uniform(-scale, scale, size=dim)
    depth = rng.uniform(0.5, 2.0) * scale * scale
    lin = mat @ center
    offset = float(center @ lin) - depth
    return Ellipsoid(mat, lin, offset)


def random_paraboloid(
    rng: np.random.Generator, dim: int = 2, n_facets: int = 3, scale: float = 1.0
) -> ParaboloidComplement:
    rows: list[np.ndarray] = []
    while len(rows) < n_facets:
        v = rng.normal(size=dim)
        if any(float(np.linalg.norm(v - w)) < 1e-3 for w in rows):
            continue
        rows.append(v)
    offsets = rng.uniform(-scale, scale, size=n_facets)
    return ParaboloidComplement(np.array(rows), offsets)


def random_quadratic(
    rng: np.random.Generator, dim: int, identity: bool = True
) -> QuadraticForm:
    if identity:
        return QuadraticForm(np.eye(dim), np.zeros(dim), 0.0)
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    eigs = rng.uniform(0.5, 2.0, size=dim)
    mat = q @ (eigs[:, None] * q.T)
    mat = 0.5 * (mat + mat.T)
    lin = rng.uniform(-1.0, 1.0, size=dim)
    const = float(rng.uniform(-1.0, 1.0))
    return QuadraticForm(mat, lin, const)


def random_query(
    rng: np.random.Generator, region: Region, gap_scale: float = 1.0
) -> tuple[np.ndarray, float, float | None]:
    """Query (x*, q*, w*) strictly inside the excluded region, below the epigraph.

    Such points are the interesting ones: outside conv(S), so a separating cut
    exists. w* is None except for paraboloid-complement regions.
    """
    if isinstance(region, Polyhedron):
        base = region.interior_point
        if base is None:
            raise ValueError("need an interior witness to aim the query")
        x = base
        for _ in range(20):
            trial = base + rng.normal(size=region.dim) * 0.3 * gap_scale
            if region.strictly_inside(trial, tol=1e-9):
                x = trial
                break
        q = float(x @ x) - rng.uniform(0.1, 1.0) * gap_scale
        return np.asarray(x, dtype=float), q, None
    if isinstance(region, Ellipsoid):
        center = region.center
        v = rng.normal(size=region.dim)
        v /= np.linalg.norm(v)
        curv = float(v @ region.matrix @ v)
        step = rng.uniform(0.0, 0.9) * np.sqrt(region.sq_span / curv)
        x = center + step * v
        q = float(x @ x) - rng.uniform(0.1, 1.0) * gap_scale
        return x, q, None
    if isinstance(region, ParaboloidComplement):
        x = rng.uniform(-gap_scale, gap_scale, size=region.dim)
        w = region.floor(x) + rng.uniform(0.1, 1.0) * gap_scale
        q = float(x @ x) - rng.uniform(0.1, 1.0) * gap_scale
        return x, q, float(w)
    raise TypeError(f"unsupported region type {type(region)!r}")


def random_instance(
    rng: np.random.Generator,
    kind: str,
    dim: int = 2,
    n_facets: int = 5,
    scale: float = 1.0,
    identity_quadratic: bool = True,
) -> Instance:
    if kind == "polyhedron":
        region: Region = random_polyhedron(rng, dim, n_facets, scale)
    elif kind == "ellipsoid":
        region = random_ellipsoid(rng, dim, scale)
    elif kind == "paraboloid_complement":
        region = random_paraboloid(rng, dim, max(2, n_facets), scale)
    else:
        raise ValueError(f"unknown region kind {kind!r}")
    quad = random_quadratic(rng, dim, identity=identity_quadratic)
    if identity_quadratic:
        x, q, w = random_query(rng, region, gap_scale=scale)
        return Instance(quad, region, x, q, w)
    # aim the query in normalized coordinates, then pull it back
    from .model import normalize

    mapped, record = normalize(quad, region)
    xp, qp, w = random_query(rng, mapped, gap_scale=scale)
    x, q = record.invert_query(xp, qp)
    return Instance(quad, region, x, q, w)
