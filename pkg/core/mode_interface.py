"""Base training-mode interfaces for the plasticity engine"""

import logging
from abc import ABC, abstractmethod
from enum import Enum
from typing import TYPE_CHECKING, Any, Dict, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

if TYPE_CHECKING:
    from components.plasticity.engine import PlasticityEngine, StreamContext
    from components.stream.api import StreamEvent

logger = logging.getLogger(__name__)


class ModeType(Enum):
    """Supported training modes"""

    CLAPP = "clapp"
    CLAPP_S = "clapp_s"
    HINGE_CPC = "hinge_cpc"
    CPC_GIM = "cpc_gim"


class StepResult(BaseModel):
    """Standard result of processing one stream event"""

    processed: bool = True
    losses: Dict[str, float] = Field(default_factory=dict)
    violations: Dict[str, bool] = Field(default_factory=dict)
    skipped: int = 0
    metadata: Optional[Dict[str, Any]] = None


class BaseTrainingMode(ABC):
    """Abstract base class for all training modes"""

    def __init__(self, engine: "PlasticityEngine"):
        """Bind the mode to a plasticity engine

        Args:
            engine: Engine owning encoder, heads, buffer and hyper-parameters
        """
        self.engine = engine
        self.mode_id = f"mode_{self.get_mode_type().value}"

    @abstractmethod
    def get_mode_type(self) -> ModeType:
        """Return the mode type"""
        pass

    @abstractmethod
    def uses_negatives(self) -> bool:
        """Whether each step needs synchronously drawn negative frames"""
        pass

    @abstractmethod
    def process(
        self,
        event: "StreamEvent",
        negatives: Sequence[np.ndarray] = (),
        context: Optional["StreamContext"] = None,
    ) -> StepResult:
        """Consume one stream event and accumulate its updates

        Args:
            event: Current stream event
            negatives: Frames from other samples (synchronous modes only)
            context: Worker context; the engine's own context when omitted

        Returns:
            StepResult with per-head losses
        """
        pass

    def validate_config(self) -> bool:
        """Validate the engine configuration for this mode

        Returns:
            True if configuration is valid

        Raises:
            ModeValidationError: If configuration is invalid
        """
        return True

    def get_mode_info(self) -> Dict[str, Any]:
        """Get mode information

        Returns:
            Dictionary containing mode metadata
        """
        return {
            "mode_id": self.mode_id,
            "mode_type": self.get_mode_type().value,
            "uses_negatives": self.uses_negatives(),
            "heads": len(self.engine.heads),
        }
