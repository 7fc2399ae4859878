"""Settings of the gradient equivalence suite."""

from pydantic import BaseModel, Field


class VerifyConfig(BaseModel):
    """Scope and size of a gradcheck run"""

    scope: str = "all"
    n_instances: int = Field(default=50, ge=1)
    master_seed: int = 20240101
