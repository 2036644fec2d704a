"""Exception types shared across the package."""


class FixmpcError(Exception):
    """Base class for all package-specific errors."""


class RangeError(FixmpcError, ValueError):
    """A value does not fit the representable range of a fixed-point format."""


class DimensionError(FixmpcError, ValueError):
    """Inconsistent matrix/vector dimensions."""


class ValidationError(FixmpcError, ValueError):
    """A problem definition violates a structural or convexity requirement."""


class NotCondensableError(FixmpcError):
    """Condensing requested for a problem with state constraints."""


class PrecisionError(FixmpcError):
    """The requested fraction width is too small for the normalization to succeed."""


class SingularKktError(FixmpcError):
    """The KKT matrix cannot be inverted (equality constraints rank-deficient)."""


class AssumptionError(FixmpcError):
    """A quantized-data convexity/consistency condition failed at this precision."""


class LayoutError(FixmpcError, ValueError):
    """A vector does not match the stage-wise constraint layout."""


class OracleFailure(FixmpcError):
    """The reference QP solver failed to produce a verified solution."""


class UnstableSystemError(FixmpcError):
    """The round-off error recurrence is not Schur stable."""


class SolverError(FixmpcError):
    """An online solve failed (propagated by the closed-loop simulator)."""
