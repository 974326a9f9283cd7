"""Exception types shared across the package."""


class QadiError(Exception):
    """Base class for all package errors."""


class DegenerateEllipse(QadiError):
    """Raised when A <= B: the elliptical transform is singular (a = 0)."""


class FocalSingularity(QadiError):
    """Raised when the transform Jacobian is evaluated at a focal point."""


class DegenerateFit(QadiError):
    """Raised when an exponential grid fit produces a non-finite exponent."""


class NonpositiveDegeneracy(QadiError):
    """Raised when a degeneracy field is not strictly positive at interior nodes."""


class SourceOverflow(QadiError):
    """Raised when the reactive source is evaluated too close to u = 1."""


class SolveFailure(QadiError):
    """Raised on a vanishing pivot in a line solve (should not occur)."""


class MonotonicityViolation(QadiError):
    """Raised when an accepted step decreases a solution component."""


class CheckpointError(QadiError):
    """Raised on a corrupt or incompatible checkpoint blob."""
