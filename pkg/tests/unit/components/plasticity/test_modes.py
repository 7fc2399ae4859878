"""Tests for the built-in training modes."""

import numpy as np
import pytest

from components.plasticity.modes import ClappMode, ClappSMode, HingeCpcMode, default_registry
from components.recurrent.config import RecurrentConfig
from core.exceptions import ModeValidationError
from core.mode_interface import ModeType

from .conftest import build_engine, event


class TestModes:
    """Test cases for mode registration and dispatch."""

    def test_registry_lists_every_mode(self):
        assert default_registry().list_modes() == ["clapp", "clapp_s", "cpc_gim", "hinge_cpc"]

    def test_create_clapp(self):
        mode = default_registry().create_mode_instance(ModeType.CLAPP, build_engine())
        assert isinstance(mode, ClappMode)
        assert not mode.uses_negatives()
        assert mode.get_mode_info()["heads"] == 2

    def test_clapp_dispatch(self):
        engine = build_engine()
        mode = ClappMode(engine)
        mode.process(event(0))
        result = mode.process(event(1))
        assert set(result.losses) == {"head0.dt1", "head1.dt1"}

    def test_clapp_s_rejects_recurrent_context(self):
        engine = build_engine(recurrent=RecurrentConfig(enabled=True, hidden_dim=4))
        with pytest.raises(ModeValidationError):
            ClappSMode(engine).validate_config()

    def test_reference_modes_need_same_layer_context(self):
        engine = build_engine(context_source="layer_above")
        with pytest.raises(ModeValidationError):
            HingeCpcMode(engine).validate_config()

    def test_synchronous_modes_use_negatives(self):
        engine = build_engine(mode="hinge_cpc")
        mode = default_registry().create_mode_instance(ModeType.HINGE_CPC, engine)
        assert mode.uses_negatives()
        mode.process(event(0), [np.full(3, 0.3)])
        result = mode.process(event(1), [np.full(3, 0.3)])
        assert "head1.dt1" in result.losses
