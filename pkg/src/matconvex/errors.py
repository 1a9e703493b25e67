"""Exception types raised by the library."""


class DomainError(ValueError):
    """A point or spectrum lies outside the open interval a function lives on."""


class ConvergenceError(RuntimeError):
    """An iterative routine (eigensolver, quadrature) did not converge."""


class HypothesisError(ValueError):
    """The scalar function is not convex with strictly concave second derivative."""


class CentralMatrixError(ValueError):
    """The matrix is a multiple of the identity, so no violation witness exists."""


class WitnessSearchError(RuntimeError):
    """The step-size search for a violation witness ran out of halvings."""
