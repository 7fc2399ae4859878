"""Integration tests for the train, probe and export workflows."""

import csv
import json

import numpy as np
import pytest

from components.encoder.checkpoint import load_checkpoint
from core.exceptions import InputError
from workflows.probe_workflow import ExportExecutor, ProbeExecutor
from workflows.run_config import RunConfig, build_encoder, load_datasets
from workflows.train_workflow import TrainingExecutor, _split_batch, checkpoint_name


def small_config(out_dir, **overrides):
    document = {
        "dataset": {"synthetic": {"n_classes": 3, "dim": 6, "steps": 8, "samples_per_class": 6}},
        "encoder": {"preset": "mlp", "hidden": [8, 5]},
        "hyper": {"batch_size": 8, "n_negatives": 2},
        "probe": {"epochs": 5},
        "epochs": 2,
        "steps_per_epoch": 24,
        "out_dir": str(out_dir),
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(document.get(key), dict):
            document[key] = {**document[key], **value}
        else:
            document[key] = value
    return RunConfig.from_dict(document)


def read_csv(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


class TestTrainingWorkflow:
    """Integration tests for TrainingExecutor."""

    def test_split_batch(self):
        assert _split_batch(10, 3) == [4, 3, 3]
        assert _split_batch(2, 4) == [1, 1, 0, 0]

    @pytest.mark.integration
    def test_zero_epochs_keep_initial_weights(self, tmp_path):
        """With no epochs the only checkpoint holds the initial encoder."""
        config = small_config(tmp_path, epochs=0)
        result = TrainingExecutor(config).run()

        assert result["success"] and result["epochs"] == []
        _, tensors = load_checkpoint(tmp_path / "checkpoints" / checkpoint_name(0))
        encoder = build_encoder(config, load_datasets(config)[0])
        for name, value in encoder.parameters().items():
            np.testing.assert_array_equal(tensors[name], value)
        assert read_csv(tmp_path / "metrics.csv") == [
            ["step", "layer", "mode", "loss", "margin_violation_rate", "update_norm"]
        ]
        assert json.loads((tmp_path / "summary.json").read_text())["steps"] == 0

    @pytest.mark.integration
    def test_artifacts(self, tmp_path):
        result = TrainingExecutor(small_config(tmp_path)).run()

        assert [epoch["batches"] for epoch in result["epochs"]] == [3, 3]
        assert (tmp_path / "config.json").is_file()
        for epoch in range(3):
            assert (tmp_path / "checkpoints" / checkpoint_name(epoch) / "manifest.json").is_file()
        rows = read_csv(tmp_path / "metrics.csv")[1:]
        assert {row[1] for row in rows} == {"0", "1"}
        assert len(rows) == 6 * 2
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["final_checkpoint"] == "checkpoints/epoch_0002"

    @pytest.mark.integration
    def test_training_changes_weights(self, tmp_path):
        TrainingExecutor(small_config(tmp_path)).run()
        _, before = load_checkpoint(tmp_path / "checkpoints" / checkpoint_name(0))
        _, after = load_checkpoint(tmp_path / "checkpoints" / checkpoint_name(2))
        assert not np.array_equal(before["layer0.weight"], after["layer0.weight"])
        assert not np.array_equal(before["head1.dt1.w_pred"], after["head1.dt1.w_pred"])

    @pytest.mark.integration
    def test_bit_identical_reruns(self, tmp_path):
        """Same config and seed give byte-identical checkpoints and metrics."""
        TrainingExecutor(small_config(tmp_path / "a")).run()
        TrainingExecutor(small_config(tmp_path / "b")).run()

        final = checkpoint_name(2)
        blobs = sorted((tmp_path / "a" / "checkpoints" / final).glob("*.f32"))
        assert blobs
        for blob in blobs:
            twin = tmp_path / "b" / "checkpoints" / final / blob.name
            assert blob.read_bytes() == twin.read_bytes()
        assert (tmp_path / "a" / "metrics.csv").read_text() == (tmp_path / "b" / "metrics.csv").read_text()

    @pytest.mark.integration
    def test_seed_changes_run(self, tmp_path):
        TrainingExecutor(small_config(tmp_path / "a")).run()
        TrainingExecutor(small_config(tmp_path / "b", seed=1)).run()
        _, a = load_checkpoint(tmp_path / "a" / "checkpoints" / checkpoint_name(2))
        _, b = load_checkpoint(tmp_path / "b" / "checkpoints" / checkpoint_name(2))
        assert not np.array_equal(a["layer0.weight"], b["layer0.weight"])

    @pytest.mark.integration
    def test_two_workers(self, tmp_path):
        result = TrainingExecutor(small_config(tmp_path, workers=2)).run()
        assert result["success"]
        assert sum(epoch["batches"] for epoch in result["epochs"]) == 6

    @pytest.mark.integration
    @pytest.mark.parametrize("mode", ["clapp_s", "hinge_cpc", "cpc_gim"])
    def test_synchronous_modes(self, tmp_path, mode):
        result = TrainingExecutor(small_config(tmp_path, hyper={"mode": mode})).run()
        assert all(np.isfinite(epoch["mean_loss"]) for epoch in result["epochs"])

    @pytest.mark.integration
    def test_recurrent_context(self, tmp_path):
        config = small_config(tmp_path, recurrent={"enabled": True, "hidden_dim": 4, "chunk_length": 5})
        TrainingExecutor(config).run()
        _, before = load_checkpoint(tmp_path / "checkpoints" / checkpoint_name(0))
        _, after = load_checkpoint(tmp_path / "checkpoints" / checkpoint_name(2))
        assert not np.array_equal(before["gru.w_iz"], after["gru.w_iz"])

    @pytest.mark.integration
    def test_offsets(self, tmp_path):
        TrainingExecutor(small_config(tmp_path, hyper={"offsets": [1, 3]})).run()
        manifest, _ = load_checkpoint(tmp_path / "checkpoints" / checkpoint_name(2))
        assert [head["offset"] for head in manifest["heads"]] == [1, 3, 1, 3]


class TestProbeWorkflow:
    """Integration tests for probing and exporting a trained checkpoint."""

    @pytest.mark.integration
    def test_probe_and_export(self, tmp_path):
        config = small_config(tmp_path)
        TrainingExecutor(config).run()
        checkpoint = tmp_path / "checkpoints" / checkpoint_name(2)

        result = ProbeExecutor(config, checkpoint).run()
        assert [(layer, split) for layer, split, _ in result["rows"]] == [
            (0, "train"),
            (0, "test"),
            (1, "train"),
            (1, "test"),
        ]
        assert len(read_csv(tmp_path / "accuracy.csv")) == 5

        exported = ExportExecutor(config, checkpoint, 1).run()
        rows = read_csv(tmp_path / "embeddings_layer1.csv")
        assert exported["rows"] == 18
        assert len(rows) == 19 and len(rows[0]) == 2 + 5

    @pytest.mark.integration
    def test_preferred_stimuli(self, tmp_path):
        config = small_config(tmp_path, probe={"top_k": 2, "epochs": 1})
        TrainingExecutor(config).run()
        ProbeExecutor(config, tmp_path / "checkpoints" / checkpoint_name(2), [1]).run()
        rows = read_csv(tmp_path / "stimuli_layer1.csv")
        assert len(rows) == 1 + 5 * 2

    @pytest.mark.integration
    def test_probe_rejects_bad_layer(self, tmp_path):
        config = small_config(tmp_path, epochs=0)
        TrainingExecutor(config).run()
        with pytest.raises(InputError):
            ProbeExecutor(config, tmp_path / "checkpoints" / checkpoint_name(0), [2]).run()


TREND_EPOCHS = 5


def trend_config(out_dir, **hyper):
    """Slow signal under 24 loud white-noise columns, read through an 8-unit bottleneck."""
    document = {
        "dataset": {
            "synthetic": {
                "n_classes": 8,
                "dim": 16,
                "steps": 16,
                "samples_per_class": 48,
                "noise_level": 0.1,
                "distractor_dims": 24,
                "distractor_level": 4.0,
            }
        },
        "encoder": {"preset": "mlp", "hidden": [8, 16]},
        "hyper": {"optimizer": "adam", "eta": 0.001, "batch_size": 32, "tied_init": True, **hyper},
        "stream": {"p_switch": 0.5},
        "probe": {"epochs": 100, "lr": 0.01},
        "epochs": TREND_EPOCHS,
        "steps_per_epoch": 1024,
        "out_dir": str(out_dir),
    }
    return RunConfig.from_dict(document)


def held_out_accuracy(config, out_dir, epoch):
    rows = ProbeExecutor(config, out_dir / "checkpoints" / checkpoint_name(epoch)).run()["rows"]
    return {layer: accuracy for layer, split, accuracy in rows if split == "test"}


@pytest.fixture(scope="module")
def trained_run(tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("trend")
    config = trend_config(out_dir)
    return config, out_dir, TrainingExecutor(config).run()


@pytest.fixture(scope="module")
def zero_retrodiction_run(tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("trend_zero")
    config = trend_config(out_dir, retrodiction="zero")
    return config, out_dir, TrainingExecutor(config).run()


@pytest.mark.performance
class TestLearningTrend:
    """Desk-scale learning-trend runs on the synthetic task."""

    def test_random_init_is_far_from_solved(self, trained_run):
        """The distractors keep a random encoder well below 0.8 test accuracy."""
        config, out_dir, _ = trained_run
        assert max(held_out_accuracy(config, out_dir, 0).values()) < 0.8

    def test_loss_decreases(self, trained_run):
        _, _, result = trained_run
        epochs = result["epochs"]
        assert epochs[-1]["mean_loss"] < epochs[0]["mean_loss"]

    def test_probe_beats_random_init(self, trained_run):
        config, out_dir, _ = trained_run
        trained_acc = held_out_accuracy(config, out_dir, TREND_EPOCHS)
        random_acc = held_out_accuracy(config, out_dir, 0)
        assert max(trained_acc.values()) >= max(random_acc.values()) + 0.20

    def test_layers_stack(self, trained_run):
        config, out_dir, _ = trained_run
        accuracy = held_out_accuracy(config, out_dir, TREND_EPOCHS)
        assert accuracy[1] >= accuracy[0]

    def test_zero_retrodiction_learns_less(self, trained_run, zero_retrodiction_run):
        """Summed over the epoch checkpoints, frozen W_retro = 0 trails learned retrodiction.

        Both runs share the seed, so their epoch-0 encoders are identical and
        only the context-side updates differ.
        """
        epochs = range(1, TREND_EPOCHS + 1)
        tied = sum(max(held_out_accuracy(*trained_run[:2], epoch).values()) for epoch in epochs)
        zero = sum(max(held_out_accuracy(*zero_retrodiction_run[:2], epoch).values()) for epoch in epochs)
        assert zero < tied
        _, _, result = zero_retrodiction_run
        assert result["epochs"][-1]["mean_loss"] < result["epochs"][0]["mean_loss"]
