"""Tests for layer specifications and presets."""

import pytest
from pydantic import ValidationError

from components.encoder.config import EncoderConfig, LayerSpec, PoolSpec, vgg6_preset


class TestLayerSpec:
    def test_dense_needs_units(self):
        with pytest.raises(ValidationError):
            LayerSpec(kind="dense")

    def test_conv_needs_channels(self):
        with pytest.raises(ValidationError):
            LayerSpec(kind="conv")

    def test_dense_cannot_pool(self):
        with pytest.raises(ValidationError):
            LayerSpec(kind="dense", units=3, pool=PoolSpec())


class TestEncoderConfig:
    """Test cases for preset selection."""

    def test_default_is_mlp(self):
        specs = EncoderConfig().layer_specs()
        assert [spec.units for spec in specs] == [64, 64]

    def test_vgg6_widths(self):
        """Width factor 8 divides the full VGG-6 channels."""
        specs = EncoderConfig(preset="vgg6", width_factor=8, depth=4).layer_specs()
        assert [spec.channels for spec in specs] == [16, 32, 32, 64]
        assert [spec.pool is not None for spec in specs] == [False, True, False, True]

    def test_custom_needs_layers(self):
        with pytest.raises(ValidationError):
            EncoderConfig(preset="custom")

    def test_vgg6_depth_range(self):
        with pytest.raises(ValueError):
            vgg6_preset(depth=7)
