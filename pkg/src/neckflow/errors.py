"""Exception hierarchy.  The CLI maps the two top-level branches to exit codes."""


class NeckflowError(Exception):
    """Base class for all package errors."""


class ConfigError(NeckflowError):
    """Invalid configuration or unsupported model choice (exit code 2)."""


class ReportError(ConfigError):
    """A report file handed to the plotter is malformed."""


class UnsupportedFamilyError(ConfigError):
    pass


class NumericalError(NeckflowError):
    """A computation could not be carried out (exit code 3)."""


class DegeneratePointError(NumericalError):
    """Evaluation at the non-smooth point eps = z = 0."""


class DegenerateMetricError(NumericalError):
    """The metric ansatz lost positivity (domain too large)."""


class NoSolutionError(NumericalError):
    """No unit-speed state exists for the requested horizontal momentum."""


class StepFailureError(NumericalError):
    """The integrator could not meet the requested tolerance."""


class CapExceededError(NumericalError):
    """Step or iteration cap reached before any stop condition fired."""


class NonMorseError(NumericalError):
    pass


class EulerCharacteristicError(NumericalError):
    pass


class SeedSensitivityError(NumericalError):
    pass


class DivergenceError(NumericalError):
    pass


class SingularIntegrandError(NumericalError):
    pass
