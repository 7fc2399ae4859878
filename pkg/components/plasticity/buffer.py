"""Per-worker accumulators for local updates and per-layer statistics."""

from dataclasses import dataclass
from typing import Dict, Iterable, Optional

import numpy as np

from core.tensor import LayerGrad


@dataclass
class LayerStats:
    """Running loss and hinge-activity counts of the heads predicting one layer"""

    loss_sum: float = 0.0
    violation_sum: float = 0.0
    count: int = 0

    @property
    def mean_loss(self) -> float:
        return self.loss_sum / self.count if self.count else 0.0

    @property
    def violation_rate(self) -> float:
        return self.violation_sum / self.count if self.count else 0.0


class UpdateBuffer:
    """Sums updates by tensor name until the batch boundary"""

    def __init__(self) -> None:
        self.updates: Dict[str, np.ndarray] = {}
        self.stats: Dict[int, LayerStats] = {}
        self.events = 0
        self.skipped = 0

    def add(self, name: str, value: np.ndarray, scale: float = 1.0) -> None:
        contribution = value if scale == 1.0 else scale * value
        if name in self.updates:
            self.updates[name] = self.updates[name] + contribution
        else:
            self.updates[name] = np.array(contribution, copy=True)

    def add_layer(self, layer: int, grad: LayerGrad, scale: float = 1.0) -> None:
        self.add(f"layer{layer}.weight", grad.weight, scale)
        if grad.bias is not None:
            self.add(f"layer{layer}.bias", grad.bias, scale)

    def add_head(
        self,
        head_name: str,
        d_pred: np.ndarray,
        d_retro: Optional[np.ndarray],
        scale: float = 1.0,
    ) -> None:
        self.add(f"{head_name}.w_pred", d_pred, scale)
        if d_retro is not None:
            self.add(f"{head_name}.w_retro", d_retro, scale)

    def add_recurrent(self, updates: Dict[str, np.ndarray]) -> None:
        for name, value in updates.items():
            self.add(f"gru.{name}", value)

    def record(self, layer: int, loss: float, violation: float) -> None:
        stats = self.stats.setdefault(layer, LayerStats())
        stats.loss_sum += loss
        stats.violation_sum += float(violation)
        stats.count += 1

    def merge(self, others: Iterable["UpdateBuffer"]) -> None:
        """Fold other buffers in, in the given order"""
        for other in others:
            for name in sorted(other.updates):
                self.add(name, other.updates[name])
            for layer, stats in sorted(other.stats.items()):
                own = self.stats.setdefault(layer, LayerStats())
                own.loss_sum += stats.loss_sum
                own.violation_sum += stats.violation_sum
                own.count += stats.count
            self.events += other.events
            self.skipped += other.skipped
            other.clear()

    def averaged(self) -> Dict[str, np.ndarray]:
        """Updates divided by the number of events seen in the batch"""
        if not self.events:
            return {}
        return {name: value / self.events for name, value in self.updates.items()}

    def clear(self) -> None:
        self.updates = {}
        self.stats = {}
        self.events = 0
        self.skipped = 0

    def is_empty(self) -> bool:
        return not self.updates
