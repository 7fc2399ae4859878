"""Configuration for the optional recurrent context layer."""

from pydantic import BaseModel, Field


class RecurrentConfig(BaseModel):
    """GRU on top of the encoder whose output serves as context of the top layer"""

    enabled: bool = False
    hidden_dim: int = Field(default=32, ge=1)
    chunk_length: int = Field(default=16, ge=1)
    carry_blocked: bool = False
