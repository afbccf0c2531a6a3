"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line can map failures to
its documented status codes (1 usage, 2 data, 3 numeric, 4 verification).
"""


class NNQuantileError(Exception):
    exit_code = 1


class UsageError(NNQuantileError, ValueError):
    exit_code = 1


class DataError(NNQuantileError, ValueError):
    exit_code = 2


class NumericError(NNQuantileError, ArithmeticError):
    exit_code = 3


class VerificationError(NNQuantileError):
    exit_code = 4


class EmptySeries(DataError):
    def __init__(self):
        super().__init__("series must contain at least one observation")


class NonFiniteValue(DataError):
    """Raised when an observation is NaN or infinite. ``index`` is 1-based."""

    def __init__(self, index):
        self.index = index
        super().__init__(f"non-finite value at position {index}")


class EmptySample(DataError):
    def __init__(self):
        super().__init__("sample must be nonempty")


class IndexOutOfRange(DataError):
    pass


class NoCandidates(DataError):
    pass


class PredictionMissing(NNQuantileError, RuntimeError):
    exit_code = 3

    def __init__(self):
        super().__init__("update() called without a preceding predict() at this step")


class NoSameWeekdayHistory(DataError):
    pass


class RankDeficient(NumericError):
    pass


class WrongLagCount(UsageError):
    pass


class SeriesTooShort(DataError):
    pass


class UnsupportedSpec(UsageError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass


class ParseError(DataError):
    """Malformed input file. ``line`` is the 1-based line number."""

    def __init__(self, line, message=None):
        self.line = line
        super().__init__(message or f"could not parse line {line}")


class NotIncreasing(DataError):
    pass
