"""Exception types raised by fuzzcor."""


class FuzzcorError(Exception):
    """Base class for all library errors."""


class InvalidFuzzyNumber(FuzzcorError, ValueError):
    pass


class EmptySample(FuzzcorError, ValueError):
    pass


class PartitionInvalid(FuzzcorError, ValueError):
    """A granule bank fails the Ruspini sum-to-one or length condition."""

    def __init__(self, message, worst_x=None, deviation=None, granule=None):
        super().__init__(message)
        self.worst_x = worst_x
        self.deviation = deviation
        self.granule = granule


class LengthMismatch(FuzzcorError, ValueError):
    pass


class AllZeroMembership(FuzzcorError, ValueError):
    pass


class DomainError(FuzzcorError, ValueError):
    pass


class DegenerateConditional(FuzzcorError, ArithmeticError):
    """Fuzzy count and binomial model have no common support."""


class EmptyMarginal(FuzzcorError, ArithmeticError):
    pass


class SingularInformation(FuzzcorError, ArithmeticError):
    pass


class EstimationFailed(FuzzcorError, RuntimeError):
    """Wraps a per-pair failure with the pair that caused it."""

    def __init__(self, pair, cause):
        super().__init__(f"estimation failed for pair {pair}: {cause}")
        self.pair = pair
        self.cause = cause
