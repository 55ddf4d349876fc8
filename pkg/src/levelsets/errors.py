"""Exception hierarchy shared by all levelsets modules."""


class LevelSetError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(LevelSetError, ValueError):
    """Input rejected before any computation ran (CLI exit code 2)."""


class ComputationError(LevelSetError, RuntimeError):
    """Numerical work failed after inputs were accepted (CLI exit code 3)."""


# geometry
class SkeletonPoint(ValidationError):
    pass


class DegenerateBody(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class EpsTooLarge(ValidationError):
    pass


class UnsupportedBody(ValidationError):
    pass


# models
class LambdaOutOfRange(ValidationError):
    pass


class UnknownModel(ValidationError):
    pass


class QuadratureFailure(ComputationError):
    pass


# estimators
class EmptySample(ValidationError):
    pass


class SampleTooLarge(ValidationError):
    pass


class InfeasibleConstraint(ComputationError):
    pass


class SearchBudgetExceeded(ComputationError):
    pass


# cylinder
class NotParallel(ComputationError):
    pass


class NonRepresentable(ComputationError):
    pass


class IncompatibleRepresentations(ValidationError):
    pass


# limit
class TruncationHit(ComputationError):
    """The simulated argmax sits on the truncation boundary.

    ``index`` is the draw index when raised from a batch of draws.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class GridTooCoarse(ComputationError):
    pass


# experiments
class InsufficientDraws(ValidationError):
    pass


class OutputExists(ValidationError):
    pass
