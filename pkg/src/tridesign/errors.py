"""Exception hierarchy."""


class TridesignError(Exception):
    """Base class for all errors raised by this package."""


class InvalidBasisError(TridesignError, ValueError):
    pass


class InvalidKernelError(TridesignError, ValueError):
    pass


class InvalidDesignError(TridesignError, ValueError):
    pass


class InvalidInputError(TridesignError, ValueError):
    pass


class DomainError(TridesignError, ValueError):
    pass


class NumericError(TridesignError, ArithmeticError):
    pass


class SingularModelError(NumericError):
    """A matrix that the model requires to be invertible is (numerically) singular."""


class SingularWeightsError(SingularModelError):
    pass


class InfeasibleUnbiasednessError(NumericError):
    """No weight set satisfies the unbiasedness identity for this design."""


class CapabilityError(TridesignError):
    """A required ingredient (e.g. a second derivative) is not available."""


class SearchError(TridesignError, RuntimeError):
    pass


class ConfigError(TridesignError, ValueError):
    pass
