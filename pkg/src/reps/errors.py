"""Exception hierarchy.

Every error raised by the library derives from :class:`RepsError`; the input
validation errors also derive from :class:`ValueError` so callers that only
care about "bad input" can catch that.
"""


class RepsError(Exception):
    """Base class for all library errors."""


class InvalidInput(RepsError, ValueError):
    """An argument violates a documented invariant."""


class ShapeMismatch(InvalidInput):
    pass


class RowNotStochastic(InvalidInput):
    def __init__(self, s, a, total):
        super().__init__(f"transition row P[{s}][{a}] sums to {total!r}, not 1 (or has negative entries)")
        self.s, self.a = s, a


class RewardOutOfRange(InvalidInput):
    def __init__(self, s, a, value):
        super().__init__(f"reward r[{s}][{a}] = {value!r} is outside [0, 1]")
        self.s, self.a = s, a


class BadDiscount(InvalidInput):
    pass


class BadInitialDistribution(InvalidInput):
    pass


class NegativeMass(InvalidInput):
    def __init__(self, s, a, value):
        super().__init__(f"visitation mass at ({s}, {a}) is negative: {value!r}")
        self.s, self.a = s, a


class BadBranching(InvalidInput):
    pass


class FloorTooLarge(InvalidInput):
    pass


class ZeroReferenceMass(InvalidInput):
    pass


class NonFiniteInput(InvalidInput):
    pass


class DimensionTooLarge(InvalidInput):
    pass


class BadRho(InvalidInput):
    pass


class ConfigError(InvalidInput):
    pass


class NumericalFailure(RepsError, ArithmeticError):
    """A computation that should be well posed produced garbage."""


class SingularSystem(NumericalFailure):
    pass


class BisectionNoBracket(NumericalFailure):
    pass


class NonFiniteObjective(NumericalFailure):
    pass
