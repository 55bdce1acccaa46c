"""Core data model: quadratic epigraphs, excluded regions, balls, and cuts.

The target set is the epigraph of a convex quadratic restricted to the
complement of a convex region's interior. After normalization the quadratic
is x -> ||x||^2 and every valid linear inequality can be written

    q_coeff * q - 2 * x_coeff . x >= offset,      q_coeff in {0, 1},

with the factor 2 fixed once here and assumed by every constructor and
evaluator in the package. For q_coeff = 1 the points violating the cut form
the open ball with center x_coeff and squared radius ||x_coeff||^2 + offset,
which is what ties cut validity to ball containment.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Union

import numpy as np

from . import solvers
from .errors import (
    DimensionMismatch,
    EmptyInterior,
    InvalidCut,
    NotPositiveDefinite,
)

SYM_TOL = 1e-12
EIG_POS_TOL = 1e-10
GEOM_TOL = 1e-8
ROUNDTRIP_TOL = 1e-9


def _as_float_array(x, ndim: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Ball:
    """Closed ball stored as center plus squared radius."""

    center: np.ndarray
    sq_radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_float_array(self.center, 1))
        if self.sq_radius < 0:
            raise ValueError("squared radius must be nonnegative")

    @property
    def radius(self) -> float:
        return float(np.sqrt(self.sq_radius))

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        d = np.asarray(x, dtype=float) - self.center
        return float(d @ d) <= self.sq_radius + tol


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """Q(x) = x'Mx + l'x + m0 with M symmetric."""

    matrix: np.ndarray
    linear: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        m = _as_float_array(self.matrix, 2)
        l = _as_float_array(self.linear, 1)
        if m.shape[0] != m.shape[1] or m.shape[0] != l.shape[0]:
            raise DimensionMismatch("matrix and linear term disagree")
        if np.max(np.abs(m - m.T), initial=0.0) > SYM_TOL * (
            1.0 + np.max(np.abs(m), initial=0.0)
        ):
            raise ValueError("matrix must be symmetric")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "linear", l)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.matrix @ x + self.linear @ x + self.constant)

    def is_positive_definite(self) -> bool:
        return float(np.min(np.linalg.eigvalsh(self.matrix))) > EIG_POS_TOL


@dataclass(frozen=True, eq=False)
class TransformRecord:
    """Invertible affine map x -> matrix@x + shift with a constant q shift.

    After applying the map, the epigraph constraint q >= Q(x) reads
    q - q_offset >= ||x'||^2 in the new coordinates x'.
    """

    matrix: np.ndarray
    shift: np.ndarray
    q_offset: float

    def apply_point(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float) + self.shift

    def invert_point(self, xp: np.ndarray) -> np.ndarray:
        return np.linalg.solve(self.matrix, np.asarray(xp, dtype=float) - self.shift)

    def apply_query(self, x: np.ndarray, q: float) -> tuple[np.ndarray, float]:
        return self.apply_point(x), q - self.q_offset

    def invert_query(self, xp: np.ndarray, qp: float) -> tuple[np.ndarray, float]:
        return self.invert_point(xp), qp + self.q_offset

    def apply_cut(self, cut: "Cut") -> "Cut":
        """Rewrite an original-coordinates cut in transformed coordinates."""
        Tit = np.linalg.inv(self.matrix).T  # matrix is symmetric, kept explicit
        coeff = Tit @ cut.x_coeff
        offset = (
            cut.offset
            - cut.q_coeff * self.q_offset
            - 2.0 * float(cut.x_coeff @ np.linalg.solve(self.matrix, self.shift))
        )
        return Cut(cut.q_coeff, coeff, offset, cut.provenance)

    def invert_cut(self, cut: "Cut") -> "Cut":
        """Rewrite a transformed-coordinates cut in original coordinates."""
        coeff = self.matrix.T @ cut.x_coeff
        offset = (
            cut.offset
            + cut.q_coeff * self.q_offset
            + 2.0 * float(cut.x_coeff @ self.shift)
        )
        return Cut(cut.q_coeff, coeff, offset, cut.provenance)


def _chebyshev_interior(normals: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """A strict interior point of {x : normals@x >= offsets}, via max-slack LP."""
    m, d = normals.shape
    row_norms = np.linalg.norm(normals, axis=1)
    data_scale = 1.0 + float(np.max(np.abs(offsets) / row_norms, initial=0.0))
    box = 50.0 * data_scale
    # variables (y, t): maximize t subject to a_i.y - ||a_i|| t >= b_i and caps
    C = np.zeros((m + 2 * d + 1, d + 1))
    c = np.zeros(m + 2 * d + 1)
    C[:m, :d] = normals
    C[:m, d] = -row_norms
    c[:m] = offsets
    C[m : m + d, :d] = np.eye(d)
    c[m : m + d] = -box
    C[m + d : m + 2 * d, :d] = -np.eye(d)
    c[m + d : m + 2 * d] = -box
    C[m + 2 * d, d] = -1.0
    c[m + 2 * d] = -box
    g = np.zeros(d + 1)
    g[d] = -1.0
    out = solvers.solve_qp(
        solvers.QpProblem(H=np.zeros((d + 1, d + 1)), g=g, ineq_mat=C, ineq_vec=c)
    )
    if out.status != solvers.SolveStatus.OPTIMAL or out.z[d] <= 1e-9 * data_scale:
        raise EmptyInterior("polyhedron has no strict interior point")
    return out.z[:d]


@dataclass(frozen=True, eq=False)
class Polyhedron:
    """{x : normals @ x >= offsets}, facets stored row-wise.

    A strict interior point is kept as a witness that the region is solid.
    Pass validate=False to build deliberately degenerate fixtures (duplicate
    facet directions, empty interior) for testing redundancy handling.
    """

    normals: np.ndarray
    offsets: np.ndarray
    interior_point: np.ndarray | None = None
    validate: bool = True

    def __post_init__(self):
        a = _as_float_array(self.normals, 2)
        b = _as_float_array(self.offsets, 1)
        if a.shape[0] != b.shape[0]:
            raise DimensionMismatch("normals and offsets disagree on facet count")
        object.__setattr__(self, "normals", a)
        object.__setattr__(self, "offsets", b)
        norms = np.linalg.norm(a, axis=1)
        if np.any(norms <= 0.0):
            raise ValueError("every facet normal must be nonzero")
        if self.validate:
            unit = a / norms[:, None]
            gram = unit @ unit.T
            for i in range(a.shape[0]):
                for j in range(i + 1, a.shape[0]):
                    if gram[i, j] >= 1.0 - 1e-12:
                        raise ValueError(
                            f"facets {i} and {j} are positive multiples of each other"
                        )
        if self.interior_point is None:
            if self.validate:
                object.__setattr__(
                    self, "interior_point", _chebyshev_interior(a, b)
                )
        else:
            p = _as_float_array(self.interior_point, 1)
            object.__setattr__(self, "interior_point", p)
            if self.validate and np.min(a @ p - b) <= 0.0:
                raise ValueError("claimed interior point is not strictly inside")

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @property
    def n_facets(self) -> int:
        return self.normals.shape[0]

    def facet_values(self, x: np.ndarray) -> np.ndarray:
        """Signed slacks normals@x - offsets (positive strictly inside)."""
        return self.normals @ np.asarray(x, dtype=float) - self.offsets

    def facet_distances(self, x: np.ndarray) -> np.ndarray:
        """Signed euclidean distances of x to each facet hyperplane boundary."""
        return self.facet_values(x) / np.linalg.norm(self.normals, axis=1)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.min(self.facet_values(x)) >= -tol)

    def strictly_inside(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.min(self.facet_values(x)) > tol)


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """{x : x' matrix x - 2 lin . x + offset <= 0}.

    The eigendecomposition is cached at construction. `bounded` is False when
    the quadratic is not positive definite; the inscribed-ball machinery
    refuses such regions.
    """

    matrix: np.ndarray
    lin: np.ndarray
    offset: float
    eigvals: np.ndarray = field(init=False)
    eigvecs: np.ndarray = field(init=False)
    bounded: bool = field(init=False)

    def __post_init__(self):
        m = _as_float_array(self.matrix, 2)
        l = _as_float_array(self.lin, 1)
        if m.shape[0] != m.shape[1] or m.shape[0] != l.shape[0]:
            raise DimensionMismatch("matrix and lin disagree")
        if np.max(np.abs(m - m.T), initial=0.0) > SYM_TOL * (
            1.0 + np.max(np.abs(m), initial=0.0)
        ):
            raise ValueError("matrix must be symmetric")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "lin", l)
        w, U = np.linalg.eigh(m)
        w = np.where(np.abs(w) <= EIG_POS_TOL, np.maximum(w, 0.0), w)
        if np.min(w) < 0.0:
            raise ValueError("matrix must be positive semidefinite")
        w = w.copy()
        w.setflags(write=False)
        Uc = U.copy()
        Uc.setflags(write=False)
        object.__setattr__(self, "eigvals", w)
        object.__setattr__(self, "eigvecs", Uc)
        object.__setattr__(self, "bounded", bool(np.min(w) > EIG_POS_TOL))
        if self.bounded:
            center = np.linalg.solve(m, l)
            if float(l @ center - self.offset) < -EIG_POS_TOL:
                raise ValueError("ellipsoid is empty")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def max_eigval(self) -> float:
        return float(np.max(self.eigvals))

    @property
    def center(self) -> np.ndarray:
        return np.linalg.solve(self.matrix, self.lin)

    @property
    def sq_span(self) -> float:
        """Depth of the constraint at the center: c'A^{-1}c - b."""
        return float(self.lin @ self.center - self.offset)

    def constraint_value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.matrix @ x - 2.0 * self.lin @ x + self.offset)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return self.constraint_value(x) <= tol

    def strictly_inside(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return self.constraint_value(x) < -tol


@dataclass(frozen=True, eq=False)
class ParaboloidComplement:
    """Region {(x, w) : normals @ x - w <= offsets}, i.e. w above a max of affine maps.

    The excluded-region role is played by this set; its complement (where the
    epigraph points live) is w <= max_i(a_i . x - b_i). At least two facets
    are required so the lifting machinery has a finite bound.
    """

    normals: np.ndarray
    offsets: np.ndarray
    validate: bool = True

    def __post_init__(self):
        a = _as_float_array(self.normals, 2)
        b = _as_float_array(self.offsets, 1)
        if a.shape[0] != b.shape[0]:
            raise DimensionMismatch("normals and offsets disagree on facet count")
        if self.validate and a.shape[0] < 2:
            raise ValueError("need at least two facets for finite lifting")
        object.__setattr__(self, "normals", a)
        object.__setattr__(self, "offsets", b)

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @property
    def n_facets(self) -> int:
        return self.normals.shape[0]

    def floor(self, x: np.ndarray) -> float:
        """max_i (a_i . x - b_i); the region is w >= floor(x)."""
        return float(np.max(self.normals @ np.asarray(x, dtype=float) - self.offsets))

    def contains(self, x: np.ndarray, w: float, tol: float = 0.0) -> bool:
        return w >= self.floor(x) - tol

    def strictly_inside(self, x: np.ndarray, w: float, tol: float = 0.0) -> bool:
        return w > self.floor(x) + tol


Region = Union[Polyhedron, Ellipsoid, ParaboloidComplement]


# --- cut provenance -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FromLinearization:
    anchor: np.ndarray


@dataclass(frozen=True, eq=False)
class FromLiftedAnchor:
    anchor: np.ndarray
    facet: int
    lift: float


@dataclass(frozen=True, eq=False)
class FromBall:
    ball: Ball


@dataclass(frozen=True, eq=False)
class FromParaboloidAnchor:
    anchor: np.ndarray
    facet: int
    lift: float


Provenance = Union[FromLinearization, FromLiftedAnchor, FromBall, FromParaboloidAnchor]


@dataclass(frozen=True, eq=False)
class Cut:
    """Linear inequality q_coeff*q - 2*x_coeff.x >= offset."""

    q_coeff: float
    x_coeff: np.ndarray
    offset: float
    provenance: Provenance | None = None

    def __post_init__(self):
        object.__setattr__(self, "x_coeff", _as_float_array(self.x_coeff, 1))
        if self.q_coeff < 0:
            raise ValueError("q coefficient must be nonnegative")

    def normalized(self) -> "Cut":
        """Scale so the q coefficient is exactly 0 or 1."""
        if self.q_coeff == 0.0 or self.q_coeff == 1.0:
            return self
        s = self.q_coeff
        return Cut(1.0, self.x_coeff / s, self.offset / s, self.provenance)

    def residual(self, x: np.ndarray, q: float) -> float:
        """Nonnegative on satisfied points."""
        return float(
            self.q_coeff * q - 2.0 * self.x_coeff @ np.asarray(x, dtype=float)
            - self.offset
        )

    def violation(self, x: np.ndarray, q: float) -> float:
        return -self.residual(x, q)

    def violating_ball(self) -> Ball | None:
        """Open ball of epigraph points cut off, or None when it is empty.

        Requires q_coeff == 1; on the epigraph surface q = ||x||^2 the cut
        residual equals ||x - x_coeff||^2 - (||x_coeff||^2 + offset).
        """
        if self.q_coeff != 1.0:
            return None
        sq_r = float(self.x_coeff @ self.x_coeff) + self.offset
        if sq_r <= 0.0:
            return None
        return Ball(self.x_coeff, sq_r)


def evaluate_cut(cut: Cut, x: np.ndarray, q: float) -> float:
    """Residual q_coeff*q - 2*x_coeff.x - offset (>= 0 means satisfied)."""
    return cut.residual(x, q)


def linearization_cut(anchor: np.ndarray) -> Cut:
    """Tangent inequality q >= 2 y.x - ||y||^2, tight at (y, ||y||^2)."""
    y = np.asarray(anchor, dtype=float)
    return Cut(1.0, y, -float(y @ y), provenance=FromLinearization(y))


def ball_cut(ball: Ball) -> Cut:
    """q >= 2 mu.x - ||mu||^2 + sq_radius; violated exactly inside the ball."""
    mu = ball.center
    return Cut(
        1.0,
        mu,
        float(ball.sq_radius - mu @ mu),
        provenance=FromBall(ball),
    )


# --- normalization --------------------------------------------------------


def normalize(quad: QuadraticForm, region: Region) -> tuple[Region, TransformRecord]:
    """Affine change of variables making the quadratic the squared norm.

    Writes Q(x) = ||Tx + s||^2 + const with T the symmetric square root of the
    quadratic's matrix, and maps the region through x' = Tx + s. Raises
    NotPositiveDefinite when no such T exists.
    """
    w, V = np.linalg.eigh(quad.matrix)
    if float(np.min(w)) <= EIG_POS_TOL:
        raise NotPositiveDefinite("quadratic form must be positive definite")
    T = V @ (np.sqrt(w)[:, None] * V.T)
    T_inv = V @ ((1.0 / np.sqrt(w))[:, None] * V.T)
    s = 0.5 * T_inv @ quad.linear
    const = quad.constant - float(s @ s)
    record = TransformRecord(matrix=T, shift=s, q_offset=const)

    if isinstance(region, Polyhedron):
        if region.dim != quad.dim:
            raise DimensionMismatch("region and quadratic dimensions differ")
        new_normals = region.normals @ T_inv
        new_offsets = region.offsets + region.normals @ (T_inv @ s)
        new_interior = (
            record.apply_point(region.interior_point)
            if region.interior_point is not None
            else None
        )
        mapped: Region = Polyhedron(
            new_normals, new_offsets, interior_point=new_interior,
            validate=region.validate,
        )
    elif isinstance(region, Ellipsoid):
        if region.dim != quad.dim:
            raise DimensionMismatch("region and quadratic dimensions differ")
        A2 = T_inv @ region.matrix @ T_inv
        c2 = A2 @ s + T_inv @ region.lin
        b2 = float(s @ A2 @ s + 2.0 * region.lin @ (T_inv @ s) + region.offset)
        mapped = Ellipsoid(A2, c2, b2)
    elif isinstance(region, ParaboloidComplement):
        if region.dim != quad.dim:
            raise DimensionMismatch("region and quadratic dimensions differ")
        new_normals = region.normals @ T_inv
        new_offsets = region.offsets + region.normals @ (T_inv @ s)
        mapped = ParaboloidComplement(
            new_normals, new_offsets, validate=region.validate
        )
    else:
        raise TypeError(f"unsupported region type {type(region)!r}")
    return mapped, record


# --- classification -------------------------------------------------------


class CutKind(Enum):
    TRIVIAL_COMPLEMENT_VALID = "trivial_complement_valid"
    LINEARIZATION = "linearization"
    LIFTED_FIRST_ORDER = "lifted_first_order"
    DOMINATED = "dominated"


@dataclass(frozen=True, eq=False)
class ClassifiedCut:
    kind: CutKind
    witness: Cut | None = None
    ball: Ball | None = None
    facet: int | None = None
    anchor: np.ndarray | None = None


def classify_cut(cut: Cut, region: Polyhedron) -> ClassifiedCut:
    """Place a normalized cut in the taxonomy of inequalities for the set.

    Cuts with no q coefficient are complement-validity statements. For the
    rest the violated epigraph points fill an open ball; validity forces that
    ball inside the region, tangency to a facet makes the cut a lifted
    first-order inequality, and strict interior containment means a strictly
    stronger concentric ball cut exists (returned as witness).
    """
    cut = cut.normalized()
    if cut.q_coeff == 0.0:
        return ClassifiedCut(kind=CutKind.TRIVIAL_COMPLEMENT_VALID)
    center = cut.x_coeff
    sq_r = float(center @ center) + cut.offset
    scale = 1.0 + float(np.max(np.abs(center), initial=0.0)) + abs(cut.offset)
    if sq_r <= GEOM_TOL * scale:
        if sq_r < -GEOM_TOL * scale:
            # strictly weaker than its own linearization; that one dominates
            return ClassifiedCut(
                kind=CutKind.DOMINATED,
                witness=linearization_cut(center),
                anchor=center,
            )
        return ClassifiedCut(kind=CutKind.LINEARIZATION, anchor=center)
    radius = float(np.sqrt(sq_r))
    dists = region.facet_distances(center)
    gap = dists - radius
    if np.min(gap) < -GEOM_TOL * scale:
        raise InvalidCut(
            "violating ball pokes out of the region; the cut is not valid"
        )
    ball = Ball(center, sq_r)
    touch = int(np.argmin(gap))
    if gap[touch] <= GEOM_TOL * scale:
        a = region.normals[touch]
        anchor = center - dists[touch] * a / np.linalg.norm(a)
        return ClassifiedCut(
            kind=CutKind.LIFTED_FIRST_ORDER, ball=ball, facet=touch, anchor=anchor
        )
    grown = Ball(center, float(np.min(dists)) ** 2)
    return ClassifiedCut(
        kind=CutKind.DOMINATED, witness=ball_cut(grown), ball=ball
    )


# --- reporting ------------------------------------------------------------


@dataclass(eq=False)
class SeparationReport:
    """Outcome of one separation query."""

    query_x: np.ndarray
    query_q: float
    cut: object | None  # Cut or a paraboloid-space cut
    violation: float
    certificate: object | None = None
    diagnostics: dict = field(default_factory=dict)
    query_w: float | None = None
