"""Exception types shared across the package."""


class DyadicaError(Exception):
    """Base class for all package errors."""


class PreconditionError(DyadicaError):
    """A documented precondition of an operation was violated.

    The message names the failing inequality or requirement so that the CLI
    can report it and exit with the refusal code.
    """


class SingularWeightError(DyadicaError):
    """A matrix weight was numerically non-invertible at a sample point."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class QuadratureError(DyadicaError):
    """Quadrature failed to resolve an integrand to the requested accuracy."""
