"""Local Plasticity Lab Core Package - tensor kernel, errors and training modes"""

__version__ = "0.1.0"
__description__ = "Layer-local contrastive plasticity rules with gradient oracles"

from .exceptions import (
    ClappSystemError,
    ConfigError,
    DimensionError,
    HistoryError,
    InputError,
    ModeError,
    ModeValidationError,
    NumericError,
    ToleranceBreachError,
)
from .mode_interface import BaseTrainingMode, ModeType, StepResult
from .mode_registry import ModeRegistry

__all__ = [
    "ClappSystemError",
    "ConfigError",
    "DimensionError",
    "HistoryError",
    "InputError",
    "ModeError",
    "ModeValidationError",
    "NumericError",
    "ToleranceBreachError",
    "BaseTrainingMode",
    "ModeType",
    "StepResult",
    "ModeRegistry",
]
