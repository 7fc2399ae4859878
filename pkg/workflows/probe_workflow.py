"""
Probe and export workflows - evaluate a frozen checkpoint
Linear-probe accuracies per layer, pooled embeddings and preferred stimuli
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from components.encoder.api import Encoder
from components.encoder.checkpoint import load_checkpoint
from components.probe.api import evaluate, extract_features, top_k_activations, train_probe
from components.probe.export import AccuracyRow, write_accuracy_csv, write_embeddings_csv, write_stimuli_csv
from components.stream.dataset import Dataset
from core.exceptions import InputError

from .run_config import RunConfig, load_datasets, probe_splits

logger = logging.getLogger(__name__)


def load_encoder(checkpoint: Path) -> Encoder:
    """Rebuild the encoder stored in a checkpoint directory

    Raises:
        InputError: If the checkpoint has no encoder manifest
    """
    manifest, tensors = load_checkpoint(checkpoint)
    if "encoder" not in manifest:
        raise InputError(f"checkpoint {checkpoint} has no encoder manifest")
    return Encoder.from_manifest(manifest["encoder"], tensors)


class ProbeExecutor:
    """Trains one linear probe per requested layer and reports train/test accuracy."""

    def __init__(self, config: RunConfig, checkpoint: Path, layers: Optional[Sequence[int]] = None):
        self.config = config
        self.checkpoint = Path(checkpoint)
        self.layers = list(layers) if layers is not None else config.probe.layers
        self.out_dir = Path(config.out_dir)
        self.encoder: Optional[Encoder] = None
        self.train_set: Optional[Dataset] = None
        self.test_set: Optional[Dataset] = None
        self.rows: List[AccuracyRow] = []

    def step1_load_checkpoint(self) -> None:
        """Step 1: load the frozen encoder and validate the layer indices."""
        self.encoder = load_encoder(self.checkpoint)
        if self.layers is None:
            self.layers = list(range(self.encoder.n_layers))
        bad = [layer for layer in self.layers if not 0 <= layer < self.encoder.n_layers]
        if bad:
            raise InputError(f"layers {bad} out of range for a {self.encoder.n_layers}-layer encoder")

    def step2_load_data(self) -> None:
        """Step 2: load the data and split off a test set when none is given."""
        train, test = load_datasets(self.config)
        self.train_set, self.test_set = probe_splits(self.config, train, test)

    def step3_train_probes(self) -> None:
        """Step 3: extract features and fit one probe per layer."""
        probe, grid = self.config.probe, self.config.grid
        pooling = self.config.stream.column_pooling
        for layer in self.layers:
            train_x, train_y = extract_features(
                self.encoder, self.train_set, layer, grid, pooling, self.config.workers
            )
            test_x, test_y = extract_features(self.encoder, self.test_set, layer, grid, pooling, self.config.workers)
            model = train_probe(
                train_x,
                train_y,
                probe.epochs,
                lr=probe.lr,
                seed=probe.seed,
                batch_size=probe.batch_size,
                optimizer=probe.optimizer,
                layer=layer,
            )
            for split, features, labels in (("train", train_x, train_y), ("test", test_x, test_y)):
                accuracy = evaluate(model, features, labels)
                self.rows.append(AccuracyRow(layer, split, accuracy, len(labels)))
            logger.info(f"Layer {layer} probe: test accuracy {self.rows[-1].accuracy:.4f}")

    def step4_write_results(self) -> Path:
        """Step 4: write accuracy.csv and, if requested, the top-k stimuli."""
        path = self.out_dir / "accuracy.csv"
        write_accuracy_csv(self.rows, path)
        if self.config.probe.top_k:
            for layer in self.layers:
                stimuli = top_k_activations(
                    self.encoder,
                    self.train_set,
                    layer,
                    self.config.probe.top_k,
                    self.config.grid,
                    self.config.stream.column_pooling,
                )
                write_stimuli_csv(layer, stimuli, self.out_dir / f"stimuli_layer{layer}.csv")
        return path

    def run(self) -> Dict[str, Any]:
        self.step1_load_checkpoint()
        self.step2_load_data()
        self.step3_train_probes()
        path = self.step4_write_results()
        return {
            "success": True,
            "accuracy_csv": str(path),
            "rows": [(row.layer, row.split, row.accuracy) for row in self.rows],
        }


class ExportExecutor:
    """Writes the pooled features of one layer for every sample."""

    def __init__(self, config: RunConfig, checkpoint: Path, layer: int, output: Optional[Path] = None):
        self.config = config
        self.checkpoint = Path(checkpoint)
        self.layer = layer
        self.output = Path(output) if output is not None else Path(config.out_dir) / f"embeddings_layer{layer}.csv"

    def run(self) -> Dict[str, Any]:
        encoder = load_encoder(self.checkpoint)
        dataset, _ = load_datasets(self.config)
        features, labels = extract_features(
            encoder,
            dataset,
            self.layer,
            self.config.grid,
            self.config.stream.column_pooling,
            self.config.workers,
        )
        write_embeddings_csv([sample.id for sample in dataset], labels, features, self.output)
        logger.info(f"Exported {len(dataset)} layer-{self.layer} embeddings to {self.output}")
        return {"success": True, "path": str(self.output), "rows": len(dataset)}
