"""Tests for the SGD and Adam optimizers."""

import numpy as np
from numpy.testing import assert_allclose

from components.plasticity.config import HyperParams
from components.plasticity.optimizer import AdamOptimizer, SgdOptimizer, build_optimizer


class TestOptimizers:
    def test_sgd_adds_update(self):
        params = {"w": np.zeros(2)}
        SgdOptimizer().apply(params, {"w": np.array([0.1, -0.2])})
        assert_allclose(params["w"], [0.1, -0.2])

    def test_sgd_keeps_dtype(self):
        params = {"w": np.zeros(2, dtype=np.float32)}
        SgdOptimizer().apply(params, {"w": np.array([0.1, -0.2])})
        assert params["w"].dtype == np.float32

    def test_adam_first_step_moves_by_lr(self):
        """The first Adam step has magnitude lr in the update's direction."""
        params = {"w": np.zeros(3)}
        AdamOptimizer(lr=0.01).apply(params, {"w": np.array([2.0, -0.5, 1e-3])})
        assert_allclose(params["w"], [0.01, -0.01, 0.01], rtol=1e-4)

    def test_adam_is_elementwise(self):
        """Transposed updates give transposed parameters."""
        rng = np.random.default_rng(0)
        params = {"a": np.zeros((2, 3)), "b": np.zeros((3, 2))}
        adam = AdamOptimizer(lr=0.01)
        for _ in range(5):
            update = rng.normal(size=(2, 3))
            adam.apply(params, {"a": update, "b": update.T.copy()})
        assert np.array_equal(params["a"], params["b"].T)

    def test_build(self):
        assert isinstance(build_optimizer(HyperParams(optimizer="sgd")), SgdOptimizer)
        adam = build_optimizer(HyperParams(optimizer="adam", eta=0.003))
        assert isinstance(adam, AdamOptimizer) and adam.lr == 0.003
