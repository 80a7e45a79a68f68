"""Exception types raised across the package."""


class AdaBBError(Exception):
    """Base class for all package errors."""


class DegenerateStep(AdaBBError):
    """The secant pair carries no usable curvature (zero denominator or <y, s> <= 0)."""


class InvalidState(AdaBBError, ValueError):
    """A stepsize controller received inputs outside its domain."""


class LineSearchStall(AdaBBError):
    """A backtracking line search drove the trial stepsize below its floor.

    ``trace`` holds the iterates accepted before the stall, when available.
    """

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class NoViableStepsize(AdaBBError):
    """Every candidate of a stepsize grid diverged."""


class LedgerMismatch(AdaBBError):
    """A coefficient identity or inequality failed on a trace."""


class BoundViolation(AdaBBError):
    """A stepsize lower bound failed on a trace."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class RequiresReference(AdaBBError):
    """An energy computation was requested without a reference solution."""


class ParseError(AdaBBError, ValueError):
    """Malformed LIBSVM input."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class LabelError(AdaBBError, ValueError):
    """Label set cannot be mapped onto {0, 1}."""


class NoConvergenceWarning(UserWarning):
    """An iterative estimator hit its iteration cap before reaching tolerance."""
