"""Exception hierarchy.

Every error raised by the toolkit derives from :class:`SimplexSliceError`,
which is itself a :class:`ValueError` so that callers treating bad input
generically keep working.
"""


class SimplexSliceError(ValueError):
    pass


class ZeroAfterProjection(SimplexSliceError):
    """Raw direction is parallel to the all-ones vector."""


class DimensionTooSmall(SimplexSliceError):
    pass


class DimensionMismatch(SimplexSliceError):
    pass


class NumericallyIllConditioned(SimplexSliceError):
    """Two distinct coefficients are too close for the float evaluator."""


class QuadratureNonConvergent(SimplexSliceError):
    pass


class NonpositiveScale(SimplexSliceError):
    pass


class NonpositiveVariance(SimplexSliceError):
    pass


class DomainError(SimplexSliceError):
    pass


class DegenerateSection(SimplexSliceError):
    pass


class EmptySection(DegenerateSection):
    """The section (or one side of it) has no volume."""


class HullFailure(SimplexSliceError):
    pass


class NotApplicable(SimplexSliceError):
    pass


class SingularCovariance(SimplexSliceError):
    pass


class UnboundedIntegral(SimplexSliceError):
    pass
