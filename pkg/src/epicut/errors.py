"""Exception types shared across the package."""


class EpicutError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(EpicutError):
    """Operands live in incompatible dimensions."""


class NotPositiveDefinite(EpicutError):
    """A quadratic form required to be positive definite is not."""


class EmptyInterior(EpicutError):
    """A polyhedron has no strict interior point."""


class SameFacetPair(EpicutError):
    """A pairwise facet operation was called with i == j."""


class NotOnFacet(EpicutError):
    """An anchor point does not lie on the requested facet."""


class LiftingTooLarge(EpicutError):
    """A lifting coefficient exceeds the largest admissible value."""


class InvalidCut(EpicutError):
    """A cut is not valid for the target set."""


class UnboundedEllipsoid(EpicutError):
    """The ellipsoidal region is unbounded, so inscribed-ball machinery fails."""


class IdenticalNormals(EpicutError):
    """A pairwise lifting bound is undefined for two identical facet normals."""


class NotInRelativeInterior(EpicutError):
    """A point must lie in the relative interior of a facet but does not."""


class SolverFailure(EpicutError):
    """A numerical solver could not produce a usable answer."""


class InstanceFormatError(EpicutError):
    """An instance or cut document is malformed."""


class NonconvergenceWarning(Warning):
    """The cutting-plane demonstration loop hit its round cap."""
