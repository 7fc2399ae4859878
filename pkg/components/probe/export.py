"""CSV renderings of probe accuracies, embeddings and preferred stimuli."""

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from core.atomic import atomic_write_text
from core.exceptions import DimensionError

from .api import PreferredStimulus

ACCURACY_HEADER = ("layer", "split", "accuracy", "n_samples")
STIMULI_HEADER = ("layer", "unit", "rank", "sample_id", "column", "position", "activation")


@dataclass(frozen=True)
class AccuracyRow:
    layer: int
    split: str
    accuracy: float
    n_samples: int


def _render(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def write_accuracy_csv(rows: Sequence[AccuracyRow], path: Path) -> None:
    atomic_write_text(
        Path(path),
        _render(ACCURACY_HEADER, ([r.layer, r.split, repr(r.accuracy), r.n_samples] for r in rows)),
    )


def embeddings_csv(ids: Sequence[int], labels: Sequence[int], features: np.ndarray) -> str:
    """One row per sample: id, label, then every feature formatted with repr"""
    if len(ids) != len(features) or len(labels) != len(features):
        raise DimensionError(f"{len(ids)} ids and {len(labels)} labels for {len(features)} feature rows")
    header = ["id", "label"] + [f"f{index}" for index in range(features.shape[1])]
    rows = (
        [int(sample_id), int(label)] + [repr(float(value)) for value in row]
        for sample_id, label, row in zip(ids, labels, features)
    )
    return _render(header, rows)


def write_embeddings_csv(
    ids: Sequence[int], labels: Sequence[int], features: np.ndarray, path: Path
) -> None:
    atomic_write_text(Path(path), embeddings_csv(ids, labels, features))


def write_stimuli_csv(layer: int, stimuli: Sequence[PreferredStimulus], path: Path) -> None:
    atomic_write_text(
        Path(path),
        _render(
            STIMULI_HEADER,
            (
                [layer, s.unit, s.rank, s.sample_id, s.column, s.position, repr(s.activation)]
                for s in stimuli
            ),
        ),
    )
