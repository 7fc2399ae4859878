"""Plasticity component: CLAPP rules, reference CPC gradients and the update engine"""

from .buffer import LayerStats, UpdateBuffer
from .config import HyperParams
from .engine import RECURRENT_CONTEXT, PlasticityEngine, StreamContext
from .metrics import METRICS_HEADER, MetricRow, MetricsLog
from .modes import (
    ClappMode,
    ClappSMode,
    CpcGimMode,
    HingeCpcMode,
    default_registry,
    register_modes,
)
from .optimizer import AdamOptimizer, SgdOptimizer, build_optimizer
from .rules import (
    CpcGrads,
    Modulator,
    PredictorHead,
    clapp_loss,
    cpc_reference_grads,
    modulator,
    score,
    score_coefficients,
    softmax_probabilities,
    split_score_pair,
    update_context_layer,
    update_predicted_layer,
    update_predictor,
)

__all__ = [
    "LayerStats",
    "UpdateBuffer",
    "HyperParams",
    "RECURRENT_CONTEXT",
    "PlasticityEngine",
    "StreamContext",
    "METRICS_HEADER",
    "MetricRow",
    "MetricsLog",
    "ClappMode",
    "ClappSMode",
    "CpcGimMode",
    "HingeCpcMode",
    "default_registry",
    "register_modes",
    "AdamOptimizer",
    "SgdOptimizer",
    "build_optimizer",
    "CpcGrads",
    "Modulator",
    "PredictorHead",
    "clapp_loss",
    "cpc_reference_grads",
    "modulator",
    "score",
    "score_coefficients",
    "softmax_probabilities",
    "split_score_pair",
    "update_context_layer",
    "update_predicted_layer",
    "update_predictor",
]
