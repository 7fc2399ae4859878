"""Datasets: samples, the on-disk index format and the synthetic sequence task."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np

from core.atomic import atomic_directory
from core.exceptions import DimensionError, InputError
from core.tensor import DEFAULT_DTYPE

logger = logging.getLogger(__name__)

BLOB_DTYPE = "f32le"


@dataclass(frozen=True)
class Sample:
    """One dataset item: an image (C×H×W) or a sequence (T×D)"""

    id: int
    tensor: np.ndarray
    label: Optional[int] = None

    @property
    def is_image(self) -> bool:
        return self.tensor.ndim == 3


class Dataset:
    """Ordered collection of samples with unique ids"""

    def __init__(self, samples: Sequence[Sample]):
        ids = [sample.id for sample in samples]
        if len(set(ids)) != len(ids):
            raise InputError("sample ids must be unique within a dataset")
        self.samples: List[Sample] = list(samples)
        self._by_id: Dict[int, Sample] = {sample.id: sample for sample in self.samples}

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def __getitem__(self, index: int) -> Sample:
        return self.samples[index]

    def by_id(self, sample_id: int) -> Sample:
        try:
            return self._by_id[sample_id]
        except KeyError:
            raise InputError(f"no sample with id {sample_id}") from None

    @property
    def labels(self) -> np.ndarray:
        """Class labels in sample order (-1 for unlabeled samples)"""
        return np.array(
            [-1 if sample.label is None else sample.label for sample in self.samples],
            dtype=np.int64,
        )

    def subset(self, indices: Sequence[int]) -> "Dataset":
        return Dataset([self.samples[i] for i in indices])

    def map_tensors(self, fn) -> "Dataset":
        return Dataset([Sample(s.id, fn(s.tensor), s.label) for s in self.samples])


def split_dataset(dataset: Dataset, test_fraction: float, seed: int) -> "tuple[Dataset, Dataset]":
    """Deterministic shuffled train/test split"""
    if not 0.0 < test_fraction < 1.0:
        raise InputError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    order = np.random.default_rng(seed).permutation(len(dataset))
    n_test = max(1, int(round(test_fraction * len(dataset))))
    test_idx = sorted(order[:n_test].tolist())
    train_idx = sorted(order[n_test:].tolist())
    return dataset.subset(train_idx), dataset.subset(test_idx)


def load_dataset(index_path: Path) -> Dataset:
    """Load a dataset from its JSON index and raw little-endian float32 blobs

    Args:
        index_path: Path to the index JSON; blob paths are relative to its directory

    Returns:
        Loaded dataset

    Raises:
        InputError: If the index or a blob is missing or malformed
        DimensionError: If a blob does not hold product(shape) values
    """
    index_path = Path(index_path)
    if not index_path.is_file():
        raise InputError(f"dataset index not found: {index_path}")
    try:
        index = json.loads(index_path.read_text(encoding="utf-8"))
        entries = index["samples"]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise InputError(f"malformed dataset index {index_path}: {e}") from e

    samples = []
    for entry in entries:
        if entry.get("dtype", BLOB_DTYPE) != BLOB_DTYPE:
            raise InputError(f"sample {entry.get('id')}: unsupported dtype {entry.get('dtype')}")
        blob = index_path.parent / entry["path"]
        if not blob.is_file():
            raise InputError(f"sample {entry['id']}: blob not found at {blob}")
        shape = tuple(int(extent) for extent in entry["shape"])
        values = np.fromfile(blob, dtype="<f4")
        if values.size != int(np.prod(shape)):
            raise DimensionError(
                f"sample {entry['id']}: blob holds {values.size} values, shape {shape} needs {int(np.prod(shape))}"
            )
        samples.append(
            Sample(
                id=int(entry["id"]),
                tensor=values.reshape(shape).astype(DEFAULT_DTYPE),
                label=entry.get("label"),
            )
        )

    if not samples:
        raise InputError(f"dataset index {index_path} lists no samples")
    logger.info(f"Loaded {len(samples)} samples from {index_path}")
    return Dataset(samples)


def save_dataset(dataset: Dataset, directory: Path) -> Path:
    """Write a dataset as ``index.json`` plus one blob per sample

    Returns:
        Path of the written index
    """
    directory = Path(directory)
    entries = []
    with atomic_directory(directory) as staging:
        for sample in dataset:
            name = f"sample_{sample.id:06d}.f32"
            np.ascontiguousarray(sample.tensor, dtype="<f4").tofile(staging / name)
            entry = {
                "id": sample.id,
                "shape": list(sample.tensor.shape),
                "dtype": BLOB_DTYPE,
                "path": name,
            }
            if sample.label is not None:
                entry["label"] = int(sample.label)
            entries.append(entry)
        (staging / "index.json").write_text(
            json.dumps({"samples": entries}, indent=2), encoding="utf-8"
        )
    logger.info(f"Saved {len(entries)} samples to {directory}")
    return directory / "index.json"


def grayscale_normalize(image: np.ndarray) -> np.ndarray:
    """Convert a C×H×W image to one luminance channel with zero mean, unit variance"""
    if image.ndim != 3:
        raise DimensionError(f"expected a C×H×W image, got shape {image.shape}")
    if image.shape[0] == 3:
        luminance = np.tensordot(np.array([0.299, 0.587, 0.114]), image, axes=([0], [0]))
    else:
        luminance = image.mean(axis=0)
    centered = luminance - luminance.mean()
    std = centered.std()
    if std > 0:
        centered = centered / std
    return centered[None].astype(DEFAULT_DTYPE)


def synthetic_sequence_dataset(
    n_classes: int,
    dim: int,
    steps: int,
    noise_level: float,
    rng_seed: int,
    samples_per_class: int = 32,
    latent_dim: int = 4,
    distractor_dims: int = 0,
    distractor_level: float = 1.0,
) -> Dataset:
    """Noisy renderings of smooth class-specific latent trajectories.

    Each class owns a set of slow sinusoids in a small latent space. A shared
    two-stage nonlinear mixing renders them into ``dim`` observed features, so
    the class is a nonlinear function of the observations while consecutive
    steps of one sample stay mutually predictive.

    ``distractor_dims`` appends that many columns of white noise with standard
    deviation ``distractor_level``. They carry no class and no temporal
    structure; an encoder has to learn to suppress them.

    Raises:
        InputError: If fewer than two classes are requested
    """
    if n_classes < 2:
        raise InputError(f"need at least 2 classes, got {n_classes}")
    if dim < 1 or steps < 1 or samples_per_class < 1:
        raise InputError("dim, steps and samples_per_class must be positive")
    if distractor_dims < 0 or distractor_level < 0:
        raise InputError("distractor_dims and distractor_level must be non-negative")

    rng = np.random.default_rng(rng_seed)
    first_mix = rng.normal(0.0, 2.0 / np.sqrt(latent_dim), size=(dim, latent_dim))
    second_mix = rng.normal(0.0, 2.0 / np.sqrt(dim), size=(dim, dim))
    frequency = rng.uniform(0.05, 0.3, size=(n_classes, latent_dim))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(n_classes, latent_dim))

    t = np.arange(steps)[None, :, None]
    latent = np.sin(frequency[:, None, :] * t + phase[:, None, :])
    hidden = np.tanh(latent @ first_mix.T)
    trajectories = np.tanh(hidden @ second_mix.T)

    samples = []
    for index in range(n_classes * samples_per_class):
        label = index % n_classes
        noise = noise_level * rng.normal(size=(steps, dim)) if noise_level > 0 else 0.0
        tensor = trajectories[label] + noise
        if distractor_dims:
            distractors = distractor_level * rng.normal(size=(steps, distractor_dims))
            tensor = np.concatenate([tensor, distractors], axis=1)
        tensor = tensor.astype(DEFAULT_DTYPE)
        samples.append(Sample(id=index, tensor=tensor, label=label))

    logger.info(
        f"Generated synthetic dataset: {n_classes} classes x {samples_per_class} samples, "
        f"{steps} steps of dim {dim} + {distractor_dims} distractors"
    )
    return Dataset(samples)
