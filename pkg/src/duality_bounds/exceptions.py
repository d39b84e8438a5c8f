"""Exception hierarchy shared by all modules."""


class DualityBoundsError(Exception):
    """Base class for errors raised by this package."""


class DimensionMismatch(DualityBoundsError, ValueError):
    pass


class NotHermitian(DualityBoundsError, ValueError):
    pass


class IndefiniteMatrix(DualityBoundsError, ValueError):
    pass


class PassivityViolation(DualityBoundsError, ValueError):
    """Raised when a scattering model fails the passivity invariants.

    ``lambda_min`` carries the offending smallest eigenvalue.
    """

    def __init__(self, message, lambda_min=None):
        super().__init__(message)
        self.lambda_min = lambda_min


class SingularDesign(DualityBoundsError):
    pass


class DesignCapExceeded(DualityBoundsError, ValueError):
    pass


class BlockStructureError(DualityBoundsError, ValueError):
    pass


class MultiplierOutsidePhiEps(DualityBoundsError, ValueError):
    def __init__(self, message, lambda_min=None):
        super().__init__(message)
        self.lambda_min = lambda_min


class LiftBracketFailure(DualityBoundsError):
    pass


class IterationLimit(DualityBoundsError):
    """Solver ran out of iterations; ``state`` holds the best iterate."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class CoercivityFailure(DualityBoundsError):
    pass


class BoundaryState(DualityBoundsError, ValueError):
    pass


class RestoreFailure(DualityBoundsError):
    pass


class PreconditionViolation(DualityBoundsError, ValueError):
    pass
