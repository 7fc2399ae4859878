"""The four training modes and their registration."""

import logging
from typing import Optional, Sequence

import numpy as np

from core.exceptions import ModeValidationError
from core.mode_interface import BaseTrainingMode, ModeType, StepResult
from core.mode_registry import ModeRegistry

from .engine import RECURRENT_CONTEXT, StreamContext

logger = logging.getLogger(__name__)


class ClappMode(BaseTrainingMode):
    """Time-local CLAPP driven by the stream's saccade label"""

    def get_mode_type(self) -> ModeType:
        return ModeType.CLAPP

    def uses_negatives(self) -> bool:
        return False

    def process(
        self,
        event,
        negatives: Sequence[np.ndarray] = (),
        context: Optional[StreamContext] = None,
    ) -> StepResult:
        return self.engine.clapp_step(event, context)


class ClappSMode(BaseTrainingMode):
    """CLAPP with one fixation and N synchronous negatives"""

    def get_mode_type(self) -> ModeType:
        return ModeType.CLAPP_S

    def uses_negatives(self) -> bool:
        return True

    def validate_config(self) -> bool:
        if any(head.context_layer == RECURRENT_CONTEXT for head in self.engine.heads):
            raise ModeValidationError("clapp_s does not support a recurrent context layer")
        return True

    def process(
        self,
        event,
        negatives: Sequence[np.ndarray] = (),
        context: Optional[StreamContext] = None,
    ) -> StepResult:
        return self.engine.clapp_s_step(event, negatives, context)


class _ReferenceMode(BaseTrainingMode):
    loss = "hinge"

    def uses_negatives(self) -> bool:
        return True

    def validate_config(self) -> bool:
        if self.engine.hyper.context_source != "same_layer":
            raise ModeValidationError(
                f"{self.get_mode_type().value} predicts within each module's top layer; "
                "context_source must be same_layer"
            )
        return True

    def process(
        self,
        event,
        negatives: Sequence[np.ndarray] = (),
        context: Optional[StreamContext] = None,
    ) -> StepResult:
        return self.engine.reference_step(event, negatives, self.loss, context)


class HingeCpcMode(_ReferenceMode):
    """Hinge loss over one positive and N negatives, backprop inside each module"""

    loss = "hinge"

    def get_mode_type(self) -> ModeType:
        return ModeType.HINGE_CPC


class CpcGimMode(_ReferenceMode):
    """Softmax CPC loss per module (layer-wise GIM by default)"""

    loss = "softmax"

    def get_mode_type(self) -> ModeType:
        return ModeType.CPC_GIM


def register_modes(registry: ModeRegistry) -> ModeRegistry:
    """Register every built-in training mode"""
    registry.register_mode(ModeType.CLAPP, ClappMode)
    registry.register_mode(ModeType.CLAPP_S, ClappSMode)
    registry.register_mode(ModeType.HINGE_CPC, HingeCpcMode)
    registry.register_mode(ModeType.CPC_GIM, CpcGimMode)
    return registry


def default_registry() -> ModeRegistry:
    return register_modes(ModeRegistry())
