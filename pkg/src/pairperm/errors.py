"""Exception hierarchy.

Every error raised for bad input derives from :class:`PairPermError` (a
``ValueError``). The two intermediate classes let the CLI map failures onto
exit codes without string matching.
"""


class PairPermError(ValueError):
    """Base class for all package errors."""


class DataError(PairPermError):
    """Input data cannot be represented as a partially paired sample."""


class PreconditionError(PairPermError):
    """A statistic or procedure is not defined for the given sample."""


class RecordBothMissing(DataError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"record {index} has both components missing")


class NonFiniteValue(DataError):
    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"record {index} contains non-finite value {value!r}")


class TooFewCompletePairs(PreconditionError):
    pass


class TooFewIncomplete(PreconditionError):
    pass


class TooFewObservations(PreconditionError):
    pass


class DegenerateVariance(PreconditionError):
    pass


class DegenerateDenominator(PreconditionError):
    pass


class DimensionMismatch(PreconditionError):
    pass


class GroupTooLarge(PreconditionError):
    def __init__(self, size: int, limit: int):
        self.size = size
        self.limit = limit
        super().__init__(
            f"randomization group has {size} elements, above the enumeration "
            f"limit of {limit}; use the Monte Carlo test instead"
        )


class DegenerateReplicate(PreconditionError):
    """A resampled statistic hit a zero variance under the strict policy."""
