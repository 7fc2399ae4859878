"""Probe component: frozen features, linear classifiers and their reports"""

from .api import (
    PreferredStimulus,
    ProbeModel,
    evaluate,
    extract_features,
    top_k_activations,
    train_probe,
)
from .config import ProbeConfig
from .export import (
    ACCURACY_HEADER,
    AccuracyRow,
    embeddings_csv,
    write_accuracy_csv,
    write_embeddings_csv,
    write_stimuli_csv,
)

__all__ = [
    "PreferredStimulus",
    "ProbeModel",
    "evaluate",
    "extract_features",
    "top_k_activations",
    "train_probe",
    "ProbeConfig",
    "ACCURACY_HEADER",
    "AccuracyRow",
    "embeddings_csv",
    "write_accuracy_csv",
    "write_embeddings_csv",
    "write_stimuli_csv",
]
