"""Exception hierarchy shared by every module."""


class AmpcError(Exception):
    """Base class for protocol and library errors."""


class InvalidArgument(AmpcError, ValueError):
    pass


class SamplingFailure(AmpcError):
    def __init__(self, message, rejection_rate=None):
        super().__init__(message)
        self.rejection_rate = rejection_rate


class TruncationInfeasible(SamplingFailure):
    """Joint resampling of a share polynomial hit its redraw cap."""


class SingularMatrix(AmpcError):
    pass


class InsufficientShares(AmpcError):
    pass


class ProtocolViolation(AmpcError):
    pass


class IncompleteAggregation(ProtocolViolation):
    pass


class InfeasibleBudget(AmpcError):
    pass


class NumericalDivergence(AmpcError):
    """Share magnitudes overflowed double precision during training."""


class NumericalDegradationWarning(RuntimeWarning):
    """Reconstructed value carries more imaginary mass than expected."""
