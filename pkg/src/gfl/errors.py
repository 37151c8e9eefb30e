"""Exception hierarchy.

Validation problems subclass :class:`ValueError`; numerical breakdowns
subclass :class:`NumericalError`. The CLI maps the first family to exit
code 2 and the second to exit code 3.
"""


class GFLError(Exception):
    """Base class for all package errors."""


class SpecError(GFLError, ValueError):
    """A field specification or configuration is invalid."""


class DimensionError(SpecError):
    """Point dimensions do not match the field specification."""


class UnsupportedFamilyError(SpecError):
    """The operation is not defined for this kernel family."""


class NumericalError(GFLError, ArithmeticError):
    """A numerical routine failed to reach its stated accuracy."""


class QuadratureError(NumericalError):
    """Quadrature did not converge; ``achieved`` is the error estimate reached."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


class DegenerateGridError(NumericalError):
    """The covariance matrix stayed indefinite up to the jitter cap."""


class NondegeneracyError(NumericalError):
    """Anchor values are linearly dependent (singular anchor covariance)."""


class DiscretizationError(SpecError):
    """A grid or ball discretization is too coarse for the requested estimate."""


class InsufficientDataError(NumericalError):
    """A fit was requested with too few usable points."""
