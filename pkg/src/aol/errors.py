"""Exception and warning types shared across the package."""


class AolError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(AolError):
    pass


class NotConverged(AolError):
    """Alternating projections did not reach the requested tolerance.

    Carries the last iterate and its residuals so the caller can decide
    whether the approximate point is acceptable.
    """

    def __init__(self, message, operator=None, frame_residual=None, row_residual=None):
        super().__init__(message)
        self.operator = operator
        self.frame_residual = frame_residual
        self.row_residual = row_residual


class DegenerateSelection(AolError):
    pass


class TrivialKernel(AolError):
    pass


class RankDeficientData(AolError):
    pass


class NonTightOperator(AolError):
    pass


class NotInTangentSpace(AolError):
    pass


class CoverageGap(AolError):
    pass


class ConfigError(AolError):
    pass


class RankDeficientWarning(UserWarning):
    """Input to a tight-frame projection was numerically rank deficient."""
