"""
Training workflow - streams events through the plasticity engine
Writes config.json, metrics.csv, per-epoch checkpoints and summary.json
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from components.encoder.api import Encoder
from components.encoder.checkpoint import save_checkpoint
from components.plasticity.engine import PlasticityEngine, StreamContext
from components.plasticity.metrics import MetricsLog
from components.plasticity.modes import default_registry
from components.stream.api import FixationSaccadeStream, NegativeSampler, build_sources
from components.stream.dataset import Dataset
from core.atomic import atomic_write_text
from core.exceptions import ConfigError, ModeError
from core.mode_interface import BaseTrainingMode

from .run_config import RunConfig, build_encoder, load_datasets, worker_seeds

logger = logging.getLogger(__name__)


def checkpoint_name(epoch: int) -> str:
    return f"epoch_{epoch:04d}"


def _split_batch(batch_size: int, workers: int) -> List[int]:
    """Events per worker; the first workers take the remainder"""
    base, extra = divmod(batch_size, workers)
    return [base + (1 if index < extra else 0) for index in range(workers)]


class TrainingExecutor:
    """Runs one training job from a validated RunConfig."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.out_dir = Path(config.out_dir)
        self.dataset: Optional[Dataset] = None
        self.encoder: Optional[Encoder] = None
        self.engine: Optional[PlasticityEngine] = None
        self.mode: Optional[BaseTrainingMode] = None
        self.contexts: List[StreamContext] = []
        self.streams: List[FixationSaccadeStream] = []
        self.samplers: List[Optional[NegativeSampler]] = []
        self.metrics = MetricsLog()
        self.epoch_summaries: List[Dict[str, Any]] = []
        self.step = 0

    def step1_load_data(self) -> None:
        """Step 1: load or generate the training data."""
        self.dataset, _ = load_datasets(self.config)

    def step2_build_engine(self) -> None:
        """Step 2: build encoder, engine, mode and one stream per worker."""
        config = self.config
        self.encoder = build_encoder(config, self.dataset)
        self.engine = PlasticityEngine(self.encoder, config.hyper, config.seed, config.recurrent)
        try:
            self.mode = default_registry().create_mode_instance(config.hyper.mode, self.engine)
        except ModeError as e:
            raise ConfigError(str(e), "hyper.mode") from e

        sources = build_sources(self.dataset, config.grid, config.stream.column_pooling)
        for worker in range(config.workers):
            stream_seed, sampler_seed = worker_seeds(config.seed, worker)
            self.streams.append(FixationSaccadeStream(sources, config.stream.p_switch, stream_seed))
            self.samplers.append(
                NegativeSampler(sources, np.random.default_rng(sampler_seed))
                if self.mode.uses_negatives()
                else None
            )
            self.contexts.append(self.engine.context if worker == 0 else self.engine.new_context())
        logger.info(
            f"Built {config.hyper.mode.value} run: {self.encoder.n_layers} layers, "
            f"{len(sources)} sequences, {config.workers} worker(s)"
        )

    def step3_prepare_output(self) -> None:
        """Step 3: create the run directory and record the resolved config."""
        self.out_dir.mkdir(parents=True, exist_ok=True)
        atomic_write_text(self.out_dir / "config.json", self.config.model_dump_json(indent=2))

    def step4_save_checkpoint(self, epoch: int) -> Path:
        """Step 4 (and after every epoch): write the engine's tensors."""
        manifest = {
            "encoder": self.encoder.manifest(),
            "config": self.config.model_dump(mode="json"),
            "seed": self.config.seed,
            "epoch": epoch,
            "step": self.step,
            "heads": [
                {
                    "name": head.name,
                    "predicted_layer": head.predicted_layer,
                    "context_layer": head.context_layer,
                    "offset": head.offset,
                }
                for head in self.engine.heads
            ],
        }
        return save_checkpoint(
            self.out_dir / "checkpoints" / checkpoint_name(epoch), manifest, self.engine.parameters()
        )

    def _run_worker(self, worker: int, n_events: int) -> int:
        ctx, stream, sampler = self.contexts[worker], self.streams[worker], self.samplers[worker]
        skipped = 0
        for event in stream.take(n_events):
            negatives = (
                sampler.draw(self.config.hyper.n_negatives, event.source_id) if sampler is not None else ()
            )
            skipped += self.mode.process(event, negatives, ctx).skipped
        return skipped

    def step5_train_epoch(self, epoch: int, pool: Optional[ThreadPoolExecutor]) -> Dict[str, Any]:
        """Step 5: one epoch of batches, each averaged and applied at its end."""
        config = self.config
        first_step = self.step
        skipped = 0
        remaining = config.steps_per_epoch
        while remaining > 0:
            batch = min(config.hyper.batch_size, remaining)
            shares = _split_batch(batch, config.workers)
            if pool is None:
                skipped += sum(self._run_worker(worker, n) for worker, n in enumerate(shares) if n)
            else:
                futures = [pool.submit(self._run_worker, worker, n) for worker, n in enumerate(shares) if n]
                skipped += sum(future.result() for future in futures)
            remaining -= batch
            if remaining == 0 and epoch == config.epochs:
                self.engine.flush_recurrent(self.contexts)
            self.engine.merge(self.contexts)
            self.metrics.extend(self.engine.apply(self.step))
            self.step += 1

        summary = {
            "epoch": epoch,
            "mean_loss": self.metrics.mean_loss(first_step, self.step - 1),
            "batches": self.step - first_step,
            "skipped": skipped,
            "saccades": sum(stream.saccades for stream in self.streams),
            "forced_saccades": sum(stream.forced_saccades for stream in self.streams),
        }
        logger.info(f"Epoch {epoch}: mean loss {summary['mean_loss']:.6f}, {skipped} skipped history steps")
        return summary

    def step6_write_artifacts(self) -> Path:
        """Step 6: write metrics.csv and summary.json."""
        self.metrics.write(self.out_dir / "metrics.csv")
        summary = {
            "mode": self.config.hyper.mode.value,
            "seed": self.config.seed,
            "epochs": self.epoch_summaries,
            "steps": self.step,
            "final_checkpoint": str(Path("checkpoints") / checkpoint_name(self.config.epochs)),
        }
        path = self.out_dir / "summary.json"
        atomic_write_text(path, json.dumps(summary, indent=2, sort_keys=True))
        return path

    def run(self) -> Dict[str, Any]:
        """Run every step; configuration problems surface before anything is written.

        Returns:
            Summary dictionary with the run directory and per-epoch losses
        """
        self.step1_load_data()
        self.step2_build_engine()
        self.step3_prepare_output()
        self.step4_save_checkpoint(0)

        pool = ThreadPoolExecutor(max_workers=self.config.workers) if self.config.workers > 1 else None
        try:
            for epoch in range(1, self.config.epochs + 1):
                self.epoch_summaries.append(self.step5_train_epoch(epoch, pool))
                self.step4_save_checkpoint(epoch)
        finally:
            if pool is not None:
                pool.shutdown()

        self.step6_write_artifacts()
        logger.info(f"Training finished: {self.step} batches, artifacts in {self.out_dir}")
        return {"success": True, "out_dir": str(self.out_dir), "epochs": self.epoch_summaries}
