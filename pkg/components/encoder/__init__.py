"""Encoder component: layer stack, trace buffer and checkpoints"""

from .api import Encoder, EncoderState, pool_to_vector, vector_upstream
from .checkpoint import load_checkpoint, save_checkpoint
from .config import EncoderConfig, LayerSpec, PoolSpec, mlp_preset, vgg6_preset

__all__ = [
    "Encoder",
    "EncoderState",
    "pool_to_vector",
    "vector_upstream",
    "load_checkpoint",
    "save_checkpoint",
    "EncoderConfig",
    "LayerSpec",
    "PoolSpec",
    "mlp_preset",
    "vgg6_preset",
]
