"""Mode registry for looking up and instantiating training modes"""

import logging
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Type

from .exceptions import ModeError, ModeValidationError
from .mode_interface import BaseTrainingMode, ModeType

if TYPE_CHECKING:
    from components.plasticity.engine import PlasticityEngine

logger = logging.getLogger(__name__)


class ModeRegistry:
    """Central registry for training modes"""

    def __init__(self) -> None:
        """Initialize an empty mode registry"""
        self._modes: Dict[str, Type[BaseTrainingMode]] = {}

    def register_mode(self, mode_type: ModeType, mode_class: Type[BaseTrainingMode]) -> None:
        """Register a mode class

        Args:
            mode_type: Mode the class implements
            mode_class: Mode class to register

        Raises:
            ModeValidationError: If the class is not a training mode
        """
        if not isinstance(mode_class, type) or not issubclass(mode_class, BaseTrainingMode):
            raise ModeValidationError(
                f"Mode class {mode_class} must inherit from BaseTrainingMode"
            )

        if mode_type.value in self._modes:
            logger.warning(f"Mode {mode_type.value} already registered, overwriting")

        self._modes[mode_type.value] = mode_class
        logger.info(f"Registered mode: {mode_type.value}")

    def get_mode_class(self, mode_type: ModeType) -> Optional[Type[BaseTrainingMode]]:
        """Get mode class by type

        Args:
            mode_type: Mode to look up

        Returns:
            Mode class if registered, None otherwise
        """
        return self._modes.get(mode_type.value)

    def create_mode_instance(
        self, mode_type: ModeType, engine: "PlasticityEngine"
    ) -> BaseTrainingMode:
        """Create a mode bound to an engine

        Args:
            mode_type: Mode to instantiate
            engine: Plasticity engine the mode drives

        Returns:
            Validated mode instance

        Raises:
            ModeError: If the mode is unknown or fails validation
        """
        mode_class = self.get_mode_class(mode_type)
        if mode_class is None:
            raise ModeError(f"Mode {mode_type.value} not found")

        instance = mode_class(engine)
        if not instance.validate_config():
            raise ModeValidationError(f"Invalid configuration for mode {mode_type.value}")

        logger.info(f"Created mode instance: {instance.mode_id}")
        return instance

    def list_modes(self) -> List[str]:
        """List registered mode names"""
        return sorted(self._modes)

    def get_registry_info(self) -> Dict[str, Any]:
        """Get information about registered modes"""
        return {
            "total_registered": len(self._modes),
            "modes": {name: cls.__name__ for name, cls in sorted(self._modes.items())},
        }
