"""Tests for run configuration loading and the builders around it."""

import json

import numpy as np
import pytest

from components.stream.api import PatchGrid
from core.exceptions import ConfigError, DimensionError, InputError
from workflows.run_config import (
    RunConfig,
    RunSettings,
    build_encoder,
    load_datasets,
    probe_splits,
    worker_seeds,
)

SMALL = {
    "dataset": {"synthetic": {"n_classes": 2, "dim": 5, "steps": 6, "samples_per_class": 4}},
    "encoder": {"preset": "mlp", "hidden": [4, 3]},
    "hyper": {"offsets": [1, 2]},
}


class TestRunConfig:
    """Test cases for RunConfig validation."""

    def test_defaults(self):
        config = RunConfig()
        assert config.seed == 0 and config.workers == 1
        assert config.grid == PatchGrid(16, 8)
        assert config.verify.master_seed == 20240101

    def test_validation_error_names_field(self):
        with pytest.raises(ConfigError) as exc_info:
            RunConfig.from_dict({"hyper": {"eta": -1.0}})
        assert exc_info.value.field_path == "hyper.eta"

    def test_unknown_mode(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"hyper": {"mode": "backprop"}})

    def test_from_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"seed": 4, "epochs": 2}))
        config = RunConfig.from_file(path)
        assert config.seed == 4 and config.epochs == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            RunConfig.from_file(tmp_path / "absent.json")

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            RunConfig.from_file(path)

    def test_flags_override_file(self):
        config = RunConfig.from_dict({"seed": 1, "workers": 2}).with_overrides(seed=5, workers=3, out_dir="o")
        assert (config.seed, config.workers, config.out_dir) == (5, 3, "o")

    def test_environment_fills_unset_fields_only(self):
        settings = RunSettings(workers=4, out_dir="from-env")
        config = RunConfig.from_dict({"workers": 2}).with_overrides(settings=settings)
        assert config.workers == 2
        assert config.out_dir == "from-env"

    def test_overrides_keep_sections(self):
        config = RunConfig.from_dict(SMALL).with_overrides(seed=3)
        assert config.hyper.offsets == [1, 2]
        assert config.encoder.hidden == [4, 3]

    def test_settings_read_environment(self, monkeypatch):
        monkeypatch.setenv("CLAPP_WORKERS", "3")
        monkeypatch.setenv("CLAPP_LOG_LEVEL", "DEBUG")
        settings = RunSettings()
        assert settings.workers == 3
        assert settings.log_level == "DEBUG"


class TestBuilders:
    """Test cases for dataset and encoder construction."""

    def test_synthetic_data(self):
        train, test = load_datasets(RunConfig.from_dict(SMALL))
        assert len(train) == 8 and test is None

    def test_probe_split(self):
        config = RunConfig.from_dict(SMALL)
        train, _ = load_datasets(config)
        probe_train, probe_test = probe_splits(config, train, None)
        assert len(probe_train) + len(probe_test) == 8
        assert not {s.id for s in probe_train} & {s.id for s in probe_test}

    def test_encoder_fits_frames(self):
        config = RunConfig.from_dict(SMALL)
        encoder = build_encoder(config, load_datasets(config)[0])
        assert encoder.input_shape == (5,)
        assert encoder.trace_depth == 3
        assert encoder.output_shapes == [(4,), (3,)]

    def test_encoder_seeded_by_run(self):
        config = RunConfig.from_dict(SMALL)
        dataset = load_datasets(config)[0]
        a = build_encoder(config, dataset)
        b = build_encoder(config.with_overrides(seed=1), dataset)
        assert not np.array_equal(a.weights[0], b.weights[0])

    def test_explicit_shape_mismatch(self):
        config = RunConfig.from_dict({**SMALL, "encoder": {"hidden": [4], "input_shape": [7]}})
        with pytest.raises(DimensionError):
            build_encoder(config, load_datasets(config)[0])

    def test_worker_seeds(self):
        assert worker_seeds(0, 0)[0] == worker_seeds(0, 0)[0]
        assert worker_seeds(0, 0)[0] != worker_seeds(0, 1)[0]
        first = np.random.default_rng(worker_seeds(2, 1)[1]).random()
        assert first == np.random.default_rng(worker_seeds(2, 1)[1]).random()
