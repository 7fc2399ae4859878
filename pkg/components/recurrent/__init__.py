"""Recurrent component: blocked GRU, e-prop traces and the BPTT reference"""

from .api import (
    PARAM_NAMES,
    GruParams,
    GruState,
    GruStep,
    RecurrentLearner,
    eprop_update,
    gru_forward_blocked,
    local_gradients,
)
from .config import RecurrentConfig
from .oracle import bptt_blocked_oracle

__all__ = [
    "PARAM_NAMES",
    "GruParams",
    "GruState",
    "GruStep",
    "RecurrentLearner",
    "eprop_update",
    "gru_forward_blocked",
    "local_gradients",
    "RecurrentConfig",
    "bptt_blocked_oracle",
]
