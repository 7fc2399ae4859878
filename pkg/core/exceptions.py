"""
Core exceptions for the local plasticity toolkit
"""

from typing import Iterable, Optional


class ClappSystemError(Exception):
    """Base exception for toolkit errors"""

    pass


class DimensionError(ClappSystemError):
    """Exception raised when tensor shapes or grids do not line up"""

    pass


class InputError(ClappSystemError):
    """Exception raised for unusable input data or indices"""

    pass


class HistoryError(ClappSystemError):
    """Exception raised when a trace or cache does not reach far enough back"""

    pass


class NumericError(ClappSystemError):
    """Exception raised for non-finite values"""

    pass


class ConfigError(ClappSystemError):
    """Exception raised for invalid run configuration"""

    def __init__(self, message: str, field_path: Optional[str] = None):
        self.field_path = field_path
        if field_path:
            message = f"{field_path}: {message}"
        super().__init__(message)


class ToleranceBreachError(ClappSystemError):
    """Exception raised when an equivalence check exceeds its tolerance"""

    def __init__(self, message: str, rules: Iterable[str] = ()):
        self.rules = list(rules)
        super().__init__(message)


class ModeError(ClappSystemError):
    """Base exception for training-mode registry errors"""

    pass


class ModeValidationError(ModeError):
    """Exception raised when a training mode or its configuration is invalid"""

    pass
