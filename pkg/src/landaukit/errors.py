"""Exception hierarchy shared by all modules.

Two families matter to the command line: validation problems (bad input,
unmet hypotheses) and numerical failures (a computation could not reach its
stated accuracy).  The CLI maps them to exit codes 2 and 3.
"""


class LandauKitError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(LandauKitError, ValueError):
    """Input rejected before any numerics ran."""


class ConfigurationError(ValidationError):
    pass


class HypothesisError(ValidationError):
    """A parameter falls outside the range where a statement is meaningful."""


class UnsupportedError(ValidationError):
    pass


class DegenerateDirectionError(ValidationError):
    pass


class OutOfRangeError(ValidationError):
    """Evaluation requested outside the band a tabulated object resolves."""


class DomainError(ValidationError):
    pass


class NumericalError(LandauKitError, ArithmeticError):
    """A computation ran but could not certify its result."""


class AccuracyError(NumericalError):
    pass


class QuadratureError(NumericalError):
    pass


class CrossValidationError(NumericalError):
    pass


class NearSingularError(NumericalError):
    pass


class StepError(NumericalError):
    pass


class DivergenceError(NumericalError):
    def __init__(self, message, last_valid_time=None):
        super().__init__(message)
        self.last_valid_time = last_valid_time


class InconclusiveHorizonError(NumericalError):
    pass


class InsufficientDataError(NumericalError):
    pass


class IncompleteDiagnosticError(NumericalError):
    def __init__(self, message, gaps=()):
        super().__init__(message)
        self.gaps = list(gaps)


class RegimeWarning(UserWarning):
    """Parameters outside the regime where the uniform bounds are proved."""


class HorizonWarning(UserWarning):
    """Too many tracked modes have left the resolved frequency band."""
