"""Exception hierarchy shared by every module of the package."""


class GrabForestError(Exception):
    """Base class for all errors raised by grabforest."""


class InvalidSequence(GrabForestError, ValueError):
    """An outdegree sequence does not encode a forest with the requested tree count."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class InvalidLaw(GrabForestError, ValueError):
    pass


class NotNormalized(InvalidLaw):
    pass


class ParseError(GrabForestError, ValueError):
    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class InvalidArms(GrabForestError, ValueError):
    pass


class OutOfRange(GrabForestError, IndexError):
    pass


class ConditioningImpossible(GrabForestError, RuntimeError):
    pass


class BudgetExceeded(GrabForestError, RuntimeError):
    """A Galton-Watson tree outgrew its vertex budget."""

    def __init__(self, partial_size):
        super().__init__(f"tree reached the vertex budget ({partial_size} vertices)")
        self.partial_size = partial_size


class BadSum(GrabForestError, ValueError):
    pass


class Infeasible(GrabForestError, ValueError):
    pass


class Unreachable(GrabForestError, ValueError):
    pass


class ZeroMean(GrabForestError, ValueError):
    pass


class TooLarge(GrabForestError, ValueError):
    pass


class HypothesisViolated(GrabForestError, ValueError):
    pass


class PeriodicSupport(GrabForestError, ValueError):
    pass


class DegenerateCells(GrabForestError, ValueError):
    pass


class OddStubs(GrabForestError, RuntimeError):
    pass


class GiantComponentWarning(UserWarning):
    pass
