"""Frozen-encoder features, the linear probe and its evaluation."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from components.encoder.api import Encoder
from components.plasticity.optimizer import AdamOptimizer, Optimizer, SgdOptimizer
from components.stream.api import PatchGrid, SequenceSource, build_sources
from components.stream.dataset import Dataset
from core.exceptions import DimensionError, InputError

logger = logging.getLogger(__name__)


def _check_layer(encoder: Encoder, layer: int) -> None:
    if not 0 <= layer < encoder.n_layers:
        raise InputError(f"layer {layer} out of range for a {encoder.n_layers}-layer encoder")


def _sample_frames(
    dataset: Dataset, grid: Optional[PatchGrid], column_pooling: bool
) -> List[List[SequenceSource]]:
    sources = build_sources(dataset, grid, column_pooling)
    per_sample: dict = {}
    for source in sources:
        per_sample.setdefault(source.sample_id, []).append(source)
    return [per_sample[sample.id] for sample in dataset]


def extract_features(
    encoder: Encoder,
    dataset: Dataset,
    layer: int,
    grid: Optional[PatchGrid] = None,
    column_pooling: bool = False,
    workers: int = 1,
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-sample mean of a layer's pooled vector over all patches or steps

    The encoder's trace buffer is left untouched.

    Returns:
        (features of shape n_samples × dim, labels with -1 for unlabeled samples)

    Raises:
        InputError: If the layer index is out of range or the dataset is empty
    """
    _check_layer(encoder, layer)
    if len(dataset) == 0:
        raise InputError("cannot extract features from an empty dataset")
    groups = _sample_frames(dataset, grid, column_pooling)

    def encode(sources: List[SequenceSource]) -> np.ndarray:
        vectors = [
            encoder.forward(frame, record=False).vector(layer)
            for source in sources
            for frame in source.frames
        ]
        return np.mean(vectors, axis=0)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(encode, groups))
    else:
        rows = [encode(sources) for sources in groups]
    logger.debug(f"Extracted layer {layer} features for {len(rows)} samples")
    return np.stack(rows), dataset.labels


@dataclass
class ProbeModel:
    """Multinomial linear classifier over standardized features"""

    weight: np.ndarray
    bias: np.ndarray
    layer: int
    mean: np.ndarray
    scale: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.weight.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weight.shape[1]

    def standardize(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.scale

    def logits(self, features: np.ndarray) -> np.ndarray:
        if features.ndim != 2 or features.shape[1] != self.feature_dim:
            raise DimensionError(
                f"features of shape {features.shape} do not fit a probe over {self.feature_dim} dims"
            )
        return self.standardize(features) @ self.weight.T + self.bias

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Argmax class per row; ties go to the lowest class index"""
        return np.argmax(self.logits(features), axis=1)


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def train_probe(
    features: np.ndarray,
    labels: np.ndarray,
    epochs: int,
    lr: float = 0.0002,
    seed: int = 0,
    batch_size: int = 32,
    optimizer: str = "sgd",
    layer: int = 0,
) -> ProbeModel:
    """Fit a softmax classifier by mini-batch gradient descent

    Weights start at zero, so zero epochs predict class 0 everywhere.

    Raises:
        InputError: If fewer than two classes are present
        DimensionError: If features and labels are not aligned
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or len(features) != len(labels) or len(labels) == 0:
        raise DimensionError(f"features {features.shape} and labels {labels.shape} are not aligned")
    if np.any(labels < 0):
        raise InputError("probe training needs every sample labelled")
    if len(np.unique(labels)) < 2:
        raise InputError("probe training needs at least two classes")

    n_classes = int(labels.max()) + 1
    mean = features.mean(axis=0)
    scale = features.std(axis=0)
    scale[scale == 0] = 1.0
    model = ProbeModel(
        weight=np.zeros((n_classes, features.shape[1])),
        bias=np.zeros(n_classes),
        layer=layer,
        mean=mean,
        scale=scale,
    )
    inputs = model.standardize(features)
    onehot = np.eye(n_classes)[labels]
    rng = np.random.default_rng(seed)
    step: Optimizer = SgdOptimizer() if optimizer == "sgd" else AdamOptimizer(lr)
    params = {"weight": model.weight, "bias": model.bias}
    gain = lr if optimizer == "sgd" else 1.0

    for _ in range(epochs):
        order = rng.permutation(len(labels))
        for start in range(0, len(order), batch_size):
            batch = order[start : start + batch_size]
            error = _softmax_rows(inputs[batch] @ model.weight.T + model.bias) - onehot[batch]
            grad_w = error.T @ inputs[batch] / len(batch)
            grad_b = error.mean(axis=0)
            step.apply(params, {"weight": -gain * grad_w, "bias": -gain * grad_b})
    logger.debug(f"Trained layer {layer} probe: {n_classes} classes, {epochs} epochs")
    return model


def evaluate(probe: ProbeModel, features: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of argmax-correct predictions

    Raises:
        DimensionError: If features and labels are empty or misaligned
    """
    labels = np.asarray(labels)
    if len(features) == 0 or len(features) != len(labels):
        raise DimensionError(f"{len(features)} feature rows for {len(labels)} labels")
    return float(np.mean(probe.predict(np.asarray(features, dtype=np.float64)) == labels))


@dataclass(frozen=True)
class PreferredStimulus:
    """One of a unit's most strongly activating patches"""

    unit: int
    rank: int
    sample_id: int
    column: int
    position: int
    activation: float


def top_k_activations(
    encoder: Encoder,
    dataset: Dataset,
    layer: int,
    k: int,
    grid: Optional[PatchGrid] = None,
    column_pooling: bool = False,
) -> List[PreferredStimulus]:
    """Indices of the k patches (or steps) that drive each unit of a layer hardest"""
    _check_layer(encoder, layer)
    if k < 1:
        raise InputError(f"k must be positive, got {k}")
    locations = []
    vectors = []
    for source in build_sources(dataset, grid, column_pooling):
        for position, frame in enumerate(source.frames):
            locations.append((source.sample_id, source.column, position))
            vectors.append(encoder.forward(frame, record=False).vector(layer))
    activity = np.stack(vectors)
    stimuli = []
    for unit in range(activity.shape[1]):
        # stable sort keeps the earliest patch first among equal activations
        ranked = np.argsort(-activity[:, unit], kind="stable")[:k]
        for rank, index in enumerate(ranked):
            sample_id, column, position = locations[index]
            stimuli.append(
                PreferredStimulus(unit, rank, sample_id, column, position, float(activity[index, unit]))
            )
    return stimuli
