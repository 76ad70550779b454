"""Exception hierarchy.

Validation errors mean the inputs are outside the domain of an operation;
numerical errors mean a computation failed on valid inputs.  The CLI maps
the two families to exit codes 2 and 3.
"""


class BlaschkeError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(BlaschkeError):
    pass


class NumericalError(BlaschkeError):
    pass


class DegreeMismatch(ValidationError):
    pass


class NearBoundaryZero(ValidationError):
    pass


class BoundaryParameter(ValidationError):
    pass


class PoleHit(ValidationError):
    pass


class CutoffExceeded(ValidationError):
    pass


class PathExit(ValidationError):
    pass


class GridMismatch(ValidationError):
    pass


class ExcessDilatation(ValidationError):
    pass


class DivisionResidue(ValidationError):
    pass


class SingularScale(ValidationError):
    pass


class MarkingFailure(NumericalError):
    pass


class BranchCollision(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class BarycenterDivergence(NumericalError):
    pass


class ResidualTooLarge(NumericalError):
    pass


class CompositionResidual(NumericalError):
    pass


class QuasicircleFail(NumericalError):
    pass


class FitResidual(NumericalError):
    pass


class MultiplierNearOne(NumericalError):
    pass
