"""Hyper-parameters of the plasticity engine."""

from typing import List, Literal, Optional

from pydantic import BaseModel, Field, model_validator

from core.mode_interface import ModeType


class HyperParams(BaseModel):
    """Learning-rule settings.

    ``eta`` is the modulator gain under plain SGD and the optimizer learning
    rate under Adam (the modulator gate is then H ∈ {0, 1}).
    """

    eta: float = Field(default=0.0002, gt=0.0)
    delta_t: int = Field(default=1, ge=1)
    offsets: Optional[List[int]] = None
    n_negatives: int = Field(default=16, ge=1)
    mode: ModeType = ModeType.CLAPP
    context_source: Literal["same_layer", "layer_above"] = "same_layer"
    batch_size: int = Field(default=32, ge=1)
    optimizer: Literal["sgd", "adam"] = "adam"
    adam_beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    retrodiction: Literal["learned", "zero"] = "learned"
    tied_init: bool = False
    module_groups: Optional[List[List[int]]] = None

    @model_validator(mode="after")
    def _check_offsets(self) -> "HyperParams":
        if self.offsets is not None:
            if not self.offsets or any(offset < 1 for offset in self.offsets):
                raise ValueError("offsets must be a non-empty list of positive steps")
            if len(set(self.offsets)) != len(self.offsets):
                raise ValueError("offsets must be distinct")
        return self

    @property
    def prediction_offsets(self) -> List[int]:
        return list(self.offsets) if self.offsets else [self.delta_t]

    @property
    def max_offset(self) -> int:
        return max(self.prediction_offsets)

    @property
    def gate_eta(self) -> float:
        """Value of H on an active hinge"""
        return self.eta if self.optimizer == "sgd" else 1.0

    @property
    def synchronous(self) -> bool:
        return self.mode is not ModeType.CLAPP

    def groups_for(self, n_layers: int) -> List[List[int]]:
        """Module groups for the reference modes, with per-mode defaults

        hinge_cpc defaults to one module holding every layer; cpc_gim to one
        module per layer.

        Raises:
            ValueError: If the groups are not a contiguous partition of the layers
        """
        if self.module_groups is None:
            if self.mode is ModeType.CPC_GIM:
                return [[layer] for layer in range(n_layers)]
            return [list(range(n_layers))]
        flat = [layer for group in self.module_groups for layer in group]
        if flat != list(range(n_layers)) or any(not group for group in self.module_groups):
            raise ValueError(
                f"module_groups must partition layers 0..{n_layers - 1} into contiguous runs"
            )
        return [list(group) for group in self.module_groups]
