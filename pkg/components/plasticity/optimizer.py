"""Optimizers applying batch-averaged local updates to named tensors."""

import logging
from abc import ABC, abstractmethod
from typing import Dict

import numpy as np

from .config import HyperParams

logger = logging.getLogger(__name__)


class Optimizer(ABC):
    """Applies an update (already pointing downhill) to a set of named tensors"""

    @abstractmethod
    def apply(self, params: Dict[str, np.ndarray], updates: Dict[str, np.ndarray]) -> None:
        pass


class SgdOptimizer(Optimizer):
    """W ← W + ΔW; the learning rate already sits in the modulator gate"""

    def apply(self, params: Dict[str, np.ndarray], updates: Dict[str, np.ndarray]) -> None:
        for name, update in updates.items():
            params[name] += update.astype(params[name].dtype, copy=False)


class AdamOptimizer(Optimizer):
    """Adam with a fixed learning rate on g = −ΔW"""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.steps = 0
        self._m: Dict[str, np.ndarray] = {}
        self._v: Dict[str, np.ndarray] = {}

    def apply(self, params: Dict[str, np.ndarray], updates: Dict[str, np.ndarray]) -> None:
        self.steps += 1
        correction1 = 1.0 - self.beta1 ** self.steps
        correction2 = 1.0 - self.beta2 ** self.steps
        for name, update in updates.items():
            grad = -np.asarray(update, dtype=np.float64)
            m = self._m.get(name, np.zeros_like(grad))
            v = self._v.get(name, np.zeros_like(grad))
            m = self.beta1 * m + (1.0 - self.beta1) * grad
            v = self.beta2 * v + (1.0 - self.beta2) * grad * grad
            self._m[name], self._v[name] = m, v
            step = self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            params[name] -= step.astype(params[name].dtype)


def build_optimizer(hyper: HyperParams) -> Optimizer:
    if hyper.optimizer == "sgd":
        return SgdOptimizer()
    return AdamOptimizer(hyper.eta, hyper.adam_beta1, hyper.adam_beta2, hyper.adam_eps)
