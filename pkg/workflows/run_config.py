"""Run configuration: one JSON document that fully determines a run."""

import json
import logging
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from components.encoder.api import Encoder
from components.encoder.config import EncoderConfig
from components.plasticity.config import HyperParams
from components.probe.config import ProbeConfig
from components.recurrent.config import RecurrentConfig
from components.stream.api import PatchGrid, build_sources
from components.stream.config import DatasetConfig, StreamConfig
from components.stream.dataset import (
    Dataset,
    grayscale_normalize,
    load_dataset,
    split_dataset,
    synthetic_sequence_dataset,
)
from components.verify.config import VerifyConfig
from core.exceptions import ConfigError, DimensionError, InputError

logger = logging.getLogger(__name__)


class RunSettings(BaseSettings):
    """Environment defaults (``CLAPP_OUT_DIR``, ``CLAPP_WORKERS``, ``CLAPP_LOG_LEVEL``)"""

    model_config = SettingsConfigDict(env_prefix="CLAPP_", extra="ignore")

    out_dir: Optional[str] = None
    workers: Optional[int] = Field(default=None, ge=1)
    log_level: str = "INFO"


class RunConfig(BaseModel):
    """Everything a run needs besides the data itself"""

    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    hyper: HyperParams = Field(default_factory=HyperParams)
    stream: StreamConfig = Field(default_factory=StreamConfig)
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    probe: ProbeConfig = Field(default_factory=ProbeConfig)
    recurrent: RecurrentConfig = Field(default_factory=RecurrentConfig)
    verify: VerifyConfig = Field(default_factory=VerifyConfig)
    seed: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)
    out_dir: str = "runs/default"
    epochs: int = Field(default=5, ge=0)
    steps_per_epoch: int = Field(default=512, ge=1)

    @classmethod
    def from_file(cls, path: Path) -> "RunConfig":
        """Load and validate a JSON config

        Raises:
            InputError: If the file does not exist
            ConfigError: If the file is not JSON or fails validation
        """
        path = Path(path)
        if not path.is_file():
            raise InputError(f"config file not found: {path}")
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
        return cls.from_dict(document)

    @classmethod
    def from_dict(cls, document: dict) -> "RunConfig":
        try:
            return cls.model_validate(document)
        except ValidationError as e:
            first = e.errors()[0]
            field_path = ".".join(str(part) for part in first["loc"]) or None
            raise ConfigError(first["msg"], field_path) from e

    def with_overrides(
        self,
        seed: Optional[int] = None,
        workers: Optional[int] = None,
        out_dir: Optional[str] = None,
        settings: Optional[RunSettings] = None,
    ) -> "RunConfig":
        """Apply CLI flags, then environment defaults for fields the file left unset"""
        updates = {}
        if settings is not None:
            if settings.workers is not None and "workers" not in self.model_fields_set:
                updates["workers"] = settings.workers
            if settings.out_dir is not None and "out_dir" not in self.model_fields_set:
                updates["out_dir"] = settings.out_dir
        if seed is not None:
            updates["seed"] = seed
        if workers is not None:
            updates["workers"] = workers
        if out_dir is not None:
            updates["out_dir"] = out_dir
        document = self.model_dump(exclude_unset=True)
        document.update(updates)
        return RunConfig.from_dict(document)

    @property
    def grid(self) -> PatchGrid:
        return PatchGrid(self.stream.patch_size, self.stream.patch_stride)


def load_datasets(config: RunConfig) -> Tuple[Dataset, Optional[Dataset]]:
    """Training dataset and, when configured, the held-out test dataset

    Raises:
        InputError: If an index file is missing or unreadable
    """
    spec = config.dataset
    if spec.synthetic is not None:
        synthetic = spec.synthetic
        train = synthetic_sequence_dataset(
            synthetic.n_classes,
            synthetic.dim,
            synthetic.steps,
            synthetic.noise_level,
            synthetic.seed,
            samples_per_class=synthetic.samples_per_class,
            distractor_dims=synthetic.distractor_dims,
            distractor_level=synthetic.distractor_level,
        )
        test = None
    else:
        train = load_dataset(Path(spec.train_index))
        test = load_dataset(Path(spec.test_index)) if spec.test_index else None
    if config.stream.grayscale:
        train = train.map_tensors(_grayscale_if_image)
        test = test.map_tensors(_grayscale_if_image) if test is not None else None
    logger.info(f"Loaded training data: {len(train)} samples")
    return train, test


def _grayscale_if_image(tensor: np.ndarray) -> np.ndarray:
    return grayscale_normalize(tensor) if tensor.ndim == 3 else tensor


def probe_splits(config: RunConfig, train: Dataset, test: Optional[Dataset]) -> Tuple[Dataset, Dataset]:
    """Probe train/test sets, splitting the training data when no test set exists"""
    if test is not None:
        return train, test
    return split_dataset(train, config.dataset.test_fraction, config.seed)


def build_encoder(config: RunConfig, dataset: Dataset) -> Encoder:
    """Encoder sized for the dataset's frames and initialised from the run seed

    Raises:
        DimensionError: If an explicit input shape disagrees with the data
    """
    sources = build_sources(dataset, config.grid, config.stream.column_pooling)
    frame_shape = tuple(sources[0].frames[0].shape)
    if config.encoder.input_shape is not None and tuple(config.encoder.input_shape) != frame_shape:
        raise DimensionError(
            f"encoder.input_shape {tuple(config.encoder.input_shape)} does not match frames of shape {frame_shape}"
        )
    seed = config.encoder.seed if config.encoder.seed is not None else config.seed
    return Encoder(
        config.encoder.layer_specs(),
        frame_shape,
        trace_depth=config.hyper.max_offset + 1,
        seed=seed,
    )


def worker_seeds(seed: int, worker: int) -> Tuple[int, np.random.SeedSequence]:
    """Stream seed and negative-sampler seed of one worker"""
    stream, sampler = np.random.SeedSequence([seed, worker]).spawn(2)
    return int(stream.generate_state(1)[0]), sampler
