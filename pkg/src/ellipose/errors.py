"""Exception hierarchy shared by all ellipose modules."""


class ElliposeError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateConic(ElliposeError):
    """Conic matrix does not describe a real, non-degenerate ellipse."""


class NotAnEllipsoid(ElliposeError):
    """Dual quadric is not a bounded ellipsoid (3x3 block not positive definite)."""


class BehindCamera(ElliposeError):
    """Geometry lies behind (or intersects) the camera principal plane."""


class InsufficientViews(ElliposeError):
    """Fewer than the minimum number of observations for reconstruction."""


class DegenerateConfiguration(ElliposeError):
    """Input geometry makes the problem rank deficient or ill posed."""


class NoSolution(ElliposeError):
    """Minimal solver found no real solution."""


class NonConvergence(ElliposeError):
    """Iterative minimizer failed to converge.

    Carries the final residual norm in ``residual``.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotEnoughObjects(ElliposeError):
    """Too few detections to attempt pose computation."""


class NoValidPose(ElliposeError):
    """No association hypothesis produced a pose with enough inliers."""


class EmptyPointSet(ElliposeError):
    """Metric evaluation requires at least one point."""


class SceneBuildError(ElliposeError):
    """One or more labels failed during scene reconstruction.

    ``failures`` maps each failing label to the underlying exception.
    """

    def __init__(self, failures):
        labels = ", ".join(sorted(failures))
        super().__init__(f"reconstruction failed for label(s): {labels}")
        self.failures = dict(failures)


class ParseError(ElliposeError):
    """File could not be parsed; ``offset`` is the byte offset when known."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class SchemaMismatch(ElliposeError):
    """Document structure does not match the expected versioned schema."""


class InvariantViolation(ElliposeError):
    """Loaded values violate a domain-type invariant."""
