"""Shared builders for plasticity tests."""

import numpy as np
import pytest

from components.encoder.api import Encoder
from components.encoder.config import mlp_preset
from components.plasticity.config import HyperParams
from components.plasticity.engine import PlasticityEngine
from components.stream.api import StreamEvent


def build_engine(hidden=(4, 3), input_dim=3, recurrent=None, activation="relu", **overrides):
    settings = {"eta": 0.05, "optimizer": "sgd", "batch_size": 1}
    settings.update(overrides)
    hyper = HyperParams(**settings)
    encoder = Encoder(
        mlp_preset(list(hidden), activation),
        (input_dim,),
        trace_depth=hyper.max_offset + 1,
        seed=0,
        dtype=np.float64,
    )
    return PlasticityEngine(encoder, hyper, seed=1, recurrent=recurrent)


def event(t, y=1, source_id=0, dim=3, seed=None):
    rng = np.random.default_rng(t if seed is None else seed)
    return StreamEvent(x=rng.uniform(0.0, 1.0, size=dim), t=t, source_id=source_id, y=y)


@pytest.fixture
def engine():
    return build_engine()
