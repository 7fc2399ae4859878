"""Configuration for linear probing."""

from typing import List, Literal, Optional

from pydantic import BaseModel, Field


class ProbeConfig(BaseModel):
    """Linear classifier settings used by the probe command"""

    layers: Optional[List[int]] = None
    epochs: int = Field(default=100, ge=0)
    lr: float = Field(default=0.01, gt=0.0)
    batch_size: int = Field(default=32, ge=1)
    optimizer: Literal["sgd", "adam"] = "adam"
    seed: int = 0
    top_k: int = Field(default=0, ge=0)
