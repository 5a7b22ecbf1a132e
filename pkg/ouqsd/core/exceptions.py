from typing import Any


class OuqsdError(Exception):
    """Base class for library errors"""


class DomainError(OuqsdError, ValueError):
    """An argument lies outside the domain of the operation"""


class RangeError(OuqsdError, ValueError):
    """A series was evaluated outside its validated range"""


class ConfigurationError(OuqsdError, ValueError):
    """Run configuration is invalid or not representable"""


class EmptyConditioningError(OuqsdError):
    """Conditioning on survival with no surviving paths"""


class InsufficientDataError(OuqsdError):
    """Not enough usable points for an estimate"""


class AccuracyError(OuqsdError):
    """Quadrature tolerance not met at the maximum refinement depth"""

    def __init__(self, message: str, estimate: Any, error: Any):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
