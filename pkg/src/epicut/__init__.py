"""Cuts for the epigraph of a convex quadratic outside an excluded region.

The library separates linear inequalities valid for the closed convex hull of

    S = {(x, q) : q >= Q(x), x outside the interior of the region}

for three region kinds: polyhedra, bounded ellipsoids, and
paraboloid-complements in one extra variable. Every emitted cut can be
re-verified by sampling oracles that share no code with the constructors.
"""

__version__ = "0.1.0"

from .errors import (
    DimensionMismatch,
    EmptyInterior,
    EpicutError,
    IdenticalNormals,
    InstanceFormatError,
    InvalidCut,
    LiftingTooLarge,
    NonconvergenceWarning,
    NotInRelativeInterior,
    NotOnFacet,
    NotPositiveDefinite,
    SameFacetPair,
    SolverFailure,
    UnboundedEllipsoid,
)
from .model import (
    Ball,
    ClassifiedCut,
    Cut,
    CutKind,
    Ellipsoid,
    FromBall,
    FromLiftedAnchor,
    FromLinearization,
    FromParaboloidAnchor,
    ParaboloidComplement,
    Polyhedron,
    QuadraticForm,
    SeparationReport,
    TransformRecord,
    ball_cut,
    classify_cut,
    evaluate_cut,
    linearization_cut,
    normalize,
)
from .polyhedral import (
    FacetGeometry,
    facet_point,
    lifted_cut,
    lifting_bound,
    max_lifting,
    separate_polyhedron,
)
from .ellipsoidal import (
    ContainmentCertificate,
    containment_margin,
    fixed_rho_separate,
    max_inscribed_sq_radius,
    separate_ellipsoid,
)
from .paraboloid import (
    ParaboloidCut,
    lifting_limit,
    max_paraboloid_lifting,
    paraboloid_cut,
    separate_paraboloid,
)
from .oracles import (
    brute_force_lifting,
    check_ball_containment,
    check_cut_validity,
    check_irredundancy,
    probe_concavity,
)
from .instances import (
    Instance,
    cut_from_dict,
    cut_to_dict,
    instance_from_dict,
    instance_hash,
    instance_to_dict,
    load_cut,
    load_instance,
    save_cut,
    save_instance,
)
from .generate import (
    random_ellipsoid,
    random_instance,
    random_paraboloid,
    random_polyhedron,
    random_quadratic,
    random_query,
)

__all__ = [
    "__version__",
    "Ball",
    "ClassifiedCut",
    "ContainmentCertificate",
    "Cut",
    "CutKind",
    "DimensionMismatch",
    "Ellipsoid",
    "EmptyInterior",
    "EpicutError",
    "FacetGeometry",
    "FromBall",
    "FromLiftedAnchor",
    "FromLinearization",
    "FromParaboloidAnchor",
    "IdenticalNormals",
    "Instance",
    "InstanceFormatError",
    "InvalidCut",
    "LiftingTooLarge",
    "NonconvergenceWarning",
    "NotInRelativeInterior",
    "NotOnFacet",
    "NotPositiveDefinite",
    "ParaboloidComplement",
    "ParaboloidCut",
    "Polyhedron",
    "QuadraticForm",
    "SameFacetPair",
    "SeparationReport",
    "SolverFailure",
    "TransformRecord",
    "UnboundedEllipsoid",
    "ball_cut",
    "brute_force_lifting",
    "check_ball_containment",
    "check_cut_validity",
    "check_irredundancy",
    "classify_cut",
    "containment_margin",
    "cut_from_dict",
    "cut_to_dict",
    "evaluate_cut",
    "facet_point",
    "fixed_rho_separate",
    "instance_from_dict",
    "instance_hash",
    "instance_to_dict",
    "lifted_cut",
    "lifting_bound",
    "lifting_limit",
    "linearization_cut",
    "load_cut",
    "load_instance",
    "max_inscribed_sq_radius",
    "max_lifting",
    "max_paraboloid_lifting",
    "normalize",
    "paraboloid_cut",
    "probe_concavity",
    "random_ellipsoid",
    "random_instance",
    "random_paraboloid",
    "random_polyhedron",
    "random_quadratic",
    "random_query",
    "save_cut",
    "save_instance",
    "separate_ellipsoid",
    "separate_paraboloid",
    "separate_polyhedron",
]
