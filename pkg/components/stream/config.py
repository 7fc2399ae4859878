"""Configuration for the fixation/saccade stream."""

from typing import Optional

from pydantic import BaseModel, Field, model_validator


class StreamConfig(BaseModel):
    """Stream protocol settings"""

    p_switch: float = Field(default=0.5, ge=0.0, le=1.0)
    patch_size: int = Field(default=16, ge=1)
    patch_stride: int = Field(default=8, ge=1)
    column_pooling: bool = False
    grayscale: bool = False


class SyntheticConfig(BaseModel):
    """Parameters of the generated sequence task"""

    n_classes: int = Field(default=8, ge=2)
    dim: int = Field(default=16, ge=1)
    steps: int = Field(default=32, ge=1)
    noise_level: float = Field(default=0.1, ge=0.0)
    samples_per_class: int = Field(default=32, ge=1)
    distractor_dims: int = Field(default=0, ge=0)
    distractor_level: float = Field(default=1.0, ge=0.0)
    seed: int = 0


class DatasetConfig(BaseModel):
    """Where training and probe data come from.

    Either ``train_index`` points at a dataset index or ``synthetic`` describes
    a generated dataset. Without ``test_index`` the probe splits the data.
    """

    train_index: Optional[str] = None
    test_index: Optional[str] = None
    synthetic: Optional[SyntheticConfig] = None
    test_fraction: float = Field(default=0.25, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _one_source(self) -> "DatasetConfig":
        if self.train_index is None and self.synthetic is None:
            self.synthetic = SyntheticConfig()
        if self.train_index is not None and self.synthetic is not None:
            raise ValueError("set either train_index or synthetic, not both")
        return self
