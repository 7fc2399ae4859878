"""Per-layer training metrics and their CSV form."""

import csv
import io
from dataclasses import astuple, dataclass
from pathlib import Path
from typing import List

from core.atomic import atomic_write_text

METRICS_HEADER = ("step", "layer", "mode", "loss", "margin_violation_rate", "update_norm")


@dataclass(frozen=True)
class MetricRow:
    step: int
    layer: int
    mode: str
    loss: float
    margin_violation_rate: float
    update_norm: float


class MetricsLog:
    """Append-only list of metric rows, rendered as one CSV per run"""

    def __init__(self) -> None:
        self.rows: List[MetricRow] = []

    def extend(self, rows: List[MetricRow]) -> None:
        self.rows.extend(rows)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for row in self.rows:
            step, layer, mode, loss, rate, norm = astuple(row)
            writer.writerow([step, layer, mode, repr(loss), repr(rate), repr(norm)])
        return buffer.getvalue()

    def write(self, path: Path) -> None:
        atomic_write_text(Path(path), self.to_csv())

    def mean_loss(self, first_step: int = 0, last_step: int = -1) -> float:
        """Mean loss over rows with first_step <= step (and step <= last_step when given)"""
        rows = [
            row
            for row in self.rows
            if row.step >= first_step and (last_step < 0 or row.step <= last_step)
        ]
        return sum(row.loss for row in rows) / len(rows) if rows else 0.0
