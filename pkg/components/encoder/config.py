"""Layer specifications and encoder presets."""

from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

# Channel widths of the full-size VGG-6 stack and the layers followed by a 2×2 pool
VGG6_CHANNELS = (128, 256, 256, 512, 1024, 1024)
VGG6_POOLED = (1, 3, 4, 5)


class PoolSpec(BaseModel):
    """Static max-pooling stage after a conv layer"""

    window: int = Field(default=2, ge=1)
    stride: int = Field(default=2, ge=1)


class LayerSpec(BaseModel):
    """One trainable layer.

    Dense layers use ``units``; conv layers use ``channels``, ``kernel``,
    ``stride`` and ``pad``. A conv layer may carry one pooling stage.
    """

    kind: Literal["dense", "conv"]
    units: Optional[int] = Field(default=None, ge=1)
    channels: Optional[int] = Field(default=None, ge=1)
    kernel: int = Field(default=3, ge=1)
    stride: int = Field(default=1, ge=1)
    pad: int = Field(default=0, ge=0)
    activation: Literal["relu", "linear"] = "relu"
    pool: Optional[PoolSpec] = None

    @model_validator(mode="after")
    def _check_kind(self) -> "LayerSpec":
        if self.kind == "dense":
            if self.units is None:
                raise ValueError("dense layers need units")
            if self.pool is not None:
                raise ValueError("only conv layers may carry a pooling stage")
        elif self.channels is None:
            raise ValueError("conv layers need channels")
        return self

    @property
    def width(self) -> int:
        return self.units if self.kind == "dense" else self.channels  # type: ignore[return-value]


def mlp_preset(hidden: List[int], activation: str = "relu") -> List[LayerSpec]:
    return [LayerSpec(kind="dense", units=units, activation=activation) for units in hidden]


def vgg6_preset(width_factor: int = 8, depth: int = 6) -> List[LayerSpec]:
    """VGG-6: 3×3 convs with padding 1, channels divided by ``width_factor``"""
    if not 1 <= depth <= len(VGG6_CHANNELS):
        raise ValueError(f"vgg6 depth must lie in 1..{len(VGG6_CHANNELS)}")
    specs = []
    for index, channels in enumerate(VGG6_CHANNELS[:depth]):
        pool = PoolSpec(window=2, stride=2) if index in VGG6_POOLED else None
        specs.append(
            LayerSpec(
                kind="conv",
                channels=max(1, channels // width_factor),
                kernel=3,
                pad=1,
                pool=pool,
            )
        )
    return specs


class EncoderConfig(BaseModel):
    """Encoder architecture.

    ``preset`` selects the layer list: ``mlp`` builds dense layers from
    ``hidden``, ``vgg6`` the reduced-width conv stack, ``custom`` uses
    ``layers`` as given.
    """

    preset: Literal["custom", "mlp", "vgg6"] = "mlp"
    hidden: List[int] = Field(default_factory=lambda: [64, 64])
    width_factor: int = Field(default=8, ge=1)
    depth: int = Field(default=6, ge=1, le=6)
    layers: List[LayerSpec] = Field(default_factory=list)
    input_shape: Optional[Tuple[int, ...]] = None
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _check_custom(self) -> "EncoderConfig":
        if self.preset == "custom" and not self.layers:
            raise ValueError("custom preset needs at least one layer")
        if self.preset == "mlp" and not self.hidden:
            raise ValueError("mlp preset needs at least one hidden width")
        return self

    def layer_specs(self) -> List[LayerSpec]:
        if self.preset == "mlp":
            return mlp_preset(self.hidden)
        if self.preset == "vgg6":
            return vgg6_preset(self.width_factor, self.depth)
        return list(self.layers)
