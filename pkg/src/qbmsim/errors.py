"""Exception taxonomy shared by all modules.

The CLI maps these onto process exit codes: ConfigError -> 1, any numerical
failure (quadrature, resolution, convergence, truncation, integrator) -> 2,
RegimeError -> 3.
"""


class QbmsimError(Exception):
    """Base class for package errors."""


class DomainError(QbmsimError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class QuadratureError(QbmsimError):
    """Adaptive quadrature failed to converge.

    Carries the last error estimate so callers can report it.
    """

    def __init__(self, message: str, estimate: float = float("nan")):
        super().__init__(message)
        self.estimate = estimate


class ResolutionError(QbmsimError):
    """Requested grid too coarse for the requested time span."""


class ConvergenceError(QbmsimError):
    """A limit (stationary plateau, series tail) was not reached."""


class RangeError(QbmsimError, ValueError):
    """Query time outside the tabulated range."""


class CapabilityError(QbmsimError):
    """Requested operation outside the supported contract."""


class TruncationError(QbmsimError):
    """Basis truncation spilled during integration.

    Carries the first time at which the edge population exceeded threshold.
    """

    def __init__(self, message: str, time: float = float("nan")):
        super().__init__(message)
        self.time = time


class IntegratorError(QbmsimError):
    """ODE integrator failed or violated an accuracy contract."""


class RegimeError(QbmsimError):
    """Operation invalid in the current coefficient regime."""


class ConfigError(QbmsimError):
    """Invalid experiment configuration.

    violations is a list of human-readable "field.path: problem" strings.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
