"""Fixation/saccade streams over patch columns and sequence samples."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import DimensionError, InputError
from core.tensor import conv_output_extent

from .dataset import Dataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PatchGrid:
    """Square patches laid on an image with a fixed stride"""

    patch_size: int
    stride: int

    def extents(self, height: int, width: int) -> Tuple[int, int]:
        """(rows, cols) of the grid on an H×W image

        Raises:
            DimensionError: If the grid does not tile the image exactly
        """
        return (
            conv_output_extent(height, self.patch_size, self.stride, 0),
            conv_output_extent(width, self.patch_size, self.stride, 0),
        )


def patchify(image: np.ndarray, grid: PatchGrid) -> List[List[np.ndarray]]:
    """Cut an image into columns of patches ordered top to bottom.

    Returns:
        One list per column; each list holds that column's C×p×p patches
    """
    if image.ndim != 3:
        raise DimensionError(f"patchify expects a C×H×W image, got shape {image.shape}")
    rows, cols = grid.extents(image.shape[1], image.shape[2])
    p, s = grid.patch_size, grid.stride
    return [
        [image[:, r * s : r * s + p, c * s : c * s + p].copy() for r in range(rows)]
        for c in range(cols)
    ]


def strips(image: np.ndarray, grid: PatchGrid) -> List[np.ndarray]:
    """Full-width horizontal strips top to bottom, one per patch row"""
    if image.ndim != 3:
        raise DimensionError(f"strips expects a C×H×W image, got shape {image.shape}")
    rows, _ = grid.extents(image.shape[1], image.shape[2])
    p, s = grid.patch_size, grid.stride
    return [image[:, r * s : r * s + p, :].copy() for r in range(rows)]


@dataclass(frozen=True)
class SequenceSource:
    """One temporal sequence: a patch column of an image or a sequence sample"""

    sample_id: int
    frames: Sequence[np.ndarray]
    label: Optional[int] = None
    column: int = 0

    def __len__(self) -> int:
        return len(self.frames)


def build_sources(
    dataset: Dataset, grid: Optional[PatchGrid] = None, column_pooling: bool = False
) -> List[SequenceSource]:
    """Turn every sample into its temporal sequences.

    Images yield one source per patch column, or a single source of full-width
    strips when ``column_pooling`` is set. A T×D sample yields one source of T
    frames.

    Raises:
        InputError: If the dataset is empty or an image arrives without a grid
    """
    if len(dataset) == 0:
        raise InputError("dataset is empty")
    sources: List[SequenceSource] = []
    for sample in dataset:
        if sample.is_image:
            if grid is None:
                raise InputError(f"sample {sample.id} is an image but no patch grid is set")
            if column_pooling:
                sources.append(SequenceSource(sample.id, strips(sample.tensor, grid), sample.label))
                continue
            for column, patches in enumerate(patchify(sample.tensor, grid)):
                sources.append(SequenceSource(sample.id, patches, sample.label, column))
        elif sample.tensor.ndim == 2:
            frames = [row.copy() for row in sample.tensor]
            sources.append(SequenceSource(sample.id, frames, sample.label))
        else:
            raise DimensionError(
                f"sample {sample.id}: expected C×H×W or T×D, got shape {sample.tensor.shape}"
            )
    return sources


def _group_by_sample(sources: Sequence[SequenceSource]) -> Dict[int, List[int]]:
    groups: Dict[int, List[int]] = {}
    for index, source in enumerate(sources):
        groups.setdefault(source.sample_id, []).append(index)
    return groups


@dataclass(frozen=True)
class StreamEvent:
    """One time step of input with its broadcast fixation/saccade label"""

    x: np.ndarray
    t: int
    source_id: int
    y: int
    position: int = 0
    column: int = 0
    label: Optional[int] = None

    @property
    def is_saccade(self) -> bool:
        return self.y == -1


class FixationSaccadeStream:
    """Stateful iterator over StreamEvents.

    At every step after the first, a saccade happens with probability
    ``p_switch``: a different sample is drawn uniformly, then one of its
    sequences and a start position inside it. Otherwise the current sequence
    advances by one frame. A fixation that runs off the end of its sequence
    is turned into a saccade. The first event has y = +1.
    """

    def __init__(self, sources: Sequence[SequenceSource], p_switch: float, rng_seed: int):
        if not sources:
            raise InputError("cannot stream an empty dataset")
        if not 0.0 <= p_switch <= 1.0:
            raise InputError(f"p_switch must lie in [0, 1], got {p_switch}")
        self.sources = list(sources)
        self.p_switch = p_switch
        self.rng = np.random.default_rng(rng_seed)
        self._groups = _group_by_sample(self.sources)
        self._sample_ids = sorted(self._groups)
        self._t = 0
        self._source: Optional[int] = None
        self._position = 0
        self.saccades = 0
        self.forced_saccades = 0
        if len(self._sample_ids) == 1:
            logger.warning("Stream has a single sample; sequence ends restart the same sequence")

    def __iter__(self) -> Iterator[StreamEvent]:
        return self

    def _jump_to(self, sample_id: int) -> None:
        candidates = self._groups[sample_id]
        self._source = candidates[int(self.rng.integers(len(candidates)))]
        self._position = int(self.rng.integers(len(self.sources[self._source])))

    def _other_sample(self, current: int) -> int:
        others = [sid for sid in self._sample_ids if sid != current]
        return others[int(self.rng.integers(len(others)))]

    def __next__(self) -> StreamEvent:
        if self._source is None:
            self._jump_to(self._sample_ids[int(self.rng.integers(len(self._sample_ids)))])
            return self._emit(y=1)

        current = self.sources[self._source].sample_id
        switch = self.rng.random() < self.p_switch
        exhausted = self._position + 1 >= len(self.sources[self._source])
        if len(self._sample_ids) == 1:
            if switch or exhausted:
                self._jump_to(current)
            else:
                self._position += 1
            return self._emit(y=1)

        if switch or exhausted:
            if exhausted and not switch:
                self.forced_saccades += 1
                logger.debug(f"Forced saccade at end of sequence, t={self._t}")
            self.saccades += 1
            self._jump_to(self._other_sample(current))
            return self._emit(y=-1)

        self._position += 1
        return self._emit(y=1)

    def _emit(self, y: int) -> StreamEvent:
        source = self.sources[self._source]
        event = StreamEvent(
            x=source.frames[self._position],
            t=self._t,
            source_id=source.sample_id,
            y=y,
            position=self._position,
            column=source.column,
            label=source.label,
        )
        self._t += 1
        return event

    def take(self, n: int) -> List[StreamEvent]:
        return [next(self) for _ in range(n)]


def fixation_saccade_stream(
    dataset: Dataset,
    p_switch: float,
    length: int,
    rng_seed: int,
    grid: Optional[PatchGrid] = None,
    column_pooling: bool = False,
) -> List[StreamEvent]:
    """Materialise ``length`` events of the fixation/saccade protocol

    Raises:
        InputError: If the dataset is empty or p_switch is out of range
    """
    if len(dataset) == 0:
        raise InputError("cannot stream an empty dataset")
    sources = build_sources(dataset, grid, column_pooling)
    return FixationSaccadeStream(sources, p_switch, rng_seed).take(length)


@dataclass
class NegativeSampler:
    """Draws frames from samples other than the current one"""

    sources: Sequence[SequenceSource]
    rng: np.random.Generator
    _groups: Dict[int, List[int]] = field(init=False)

    def __post_init__(self) -> None:
        self._groups = _group_by_sample(self.sources)
        if len(self._groups) < 2:
            raise InputError("negative sampling needs at least two samples")

    def draw(self, n: int, exclude_sample_id: int) -> List[np.ndarray]:
        """N frames from uniformly chosen other samples at random positions"""
        others = [sid for sid in sorted(self._groups) if sid != exclude_sample_id]
        frames = []
        for _ in range(n):
            sample_id = others[int(self.rng.integers(len(others)))]
            group = self._groups[sample_id]
            source = self.sources[group[int(self.rng.integers(len(group)))]]
            frames.append(source.frames[int(self.rng.integers(len(source)))])
        return frames
