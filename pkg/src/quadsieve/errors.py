"""Exception hierarchy shared by every module."""


class QuadSieveError(Exception):
    """Base class for all library errors."""


class DegenerateForm(QuadSieveError, ValueError):
    pass


class DenominatorNotPPower(QuadSieveError, ValueError):
    pass


class DenominatorDivisibleByP(QuadSieveError, ValueError):
    pass


class BudgetExceeded(QuadSieveError):
    """A scan or enumeration would exceed its configured cap."""


class BoxTooLarge(BudgetExceeded):
    pass


class CapExceeded(BudgetExceeded):
    pass


class BadPrime(QuadSieveError, ValueError):
    pass


class NotStabilized(QuadSieveError):
    pass


class ChartDegenerate(QuadSieveError, ValueError):
    pass


class DegenerateFit(QuadSieveError, ValueError):
    pass


class NotSquarefree(QuadSieveError, ValueError):
    pass


class MissingPrime(QuadSieveError, KeyError):
    pass


class ZeroDenominator(QuadSieveError, ZeroDivisionError):
    pass


class InvalidDensity(QuadSieveError, ValueError):
    pass


class NotCoprime(QuadSieveError, ValueError):
    pass


class ConfigInvalid(QuadSieveError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
