"""Stream component: datasets and fixation/saccade event streams"""

from .api import (
    FixationSaccadeStream,
    NegativeSampler,
    PatchGrid,
    SequenceSource,
    StreamEvent,
    build_sources,
    fixation_saccade_stream,
    patchify,
)
from .config import DatasetConfig, StreamConfig, SyntheticConfig
from .dataset import (
    Dataset,
    Sample,
    grayscale_normalize,
    load_dataset,
    save_dataset,
    split_dataset,
    synthetic_sequence_dataset,
)

__all__ = [
    "FixationSaccadeStream",
    "NegativeSampler",
    "PatchGrid",
    "SequenceSource",
    "StreamEvent",
    "build_sources",
    "fixation_saccade_stream",
    "patchify",
    "DatasetConfig",
    "StreamConfig",
    "SyntheticConfig",
    "Dataset",
    "Sample",
    "grayscale_normalize",
    "load_dataset",
    "save_dataset",
    "split_dataset",
    "synthetic_sequence_dataset",
]
