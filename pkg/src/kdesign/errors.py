"""Exception and warning types shared across the package."""


class KDesignError(ValueError):
    """Base class for all errors raised by kdesign."""


class InvalidDimensionError(KDesignError):
    pass


class InvalidSectorError(KDesignError):
    pass


class DimensionMismatchError(KDesignError):
    pass


class ContractViolation(KDesignError):
    """An input breaks an operation's precondition (e.g. a non-Hermitian matrix)."""


class TooLargeError(KDesignError):
    """A brute-force evaluation was requested beyond its cost guard."""


class SingularGramError(KDesignError):
    pass


class DegenerateSpectrumError(KDesignError):
    pass


class InsufficientSignalError(KDesignError):
    """Too few points above the noise floor to fit or compare."""


class NoCrossingError(KDesignError):
    pass


class ConfigError(KDesignError):
    pass


class SampleBoundViolation(ArithmeticError):
    """A Monte Carlo draw exceeded the hard bound |Tr V|^{2k} <= D^{2k}."""


class DegenerateSpectrumWarning(UserWarning):
    pass


class IllConditionedWarning(UserWarning):
    pass
