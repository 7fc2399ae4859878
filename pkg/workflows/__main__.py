"""Command-line entry point: train, probe, gradcheck, export-embeddings, stream-preview."""

import logging
import sys
from pathlib import Path
from typing import Optional, Tuple

import click
from dotenv import load_dotenv

from components.stream.api import fixation_saccade_stream
from components.verify.api import RULES, assert_report, equivalence_report, write_report
from core.exceptions import (
    ClappSystemError,
    ConfigError,
    DimensionError,
    InputError,
    ToleranceBreachError,
)

from .probe_workflow import ExportExecutor, ProbeExecutor
from .run_config import RunConfig, RunSettings, load_datasets, worker_seeds
from .train_workflow import TrainingExecutor

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_TOLERANCE = 3


def _exit_code(error: Exception) -> int:
    if isinstance(error, ToleranceBreachError):
        return EXIT_TOLERANCE
    if isinstance(error, (ConfigError, InputError, DimensionError)):
        return EXIT_VALIDATION
    return EXIT_RUNTIME


def _fail(error: Exception, verbose: bool) -> None:
    logger.error(f"Command failed: {error}")
    if verbose and not isinstance(error, ClappSystemError):
        import traceback

        traceback.print_exc()
    click.echo(f"Error: {error}", err=True)
    sys.exit(_exit_code(error))


def _resolve_config(ctx: click.Context) -> RunConfig:
    options = ctx.obj
    config = RunConfig.from_file(options["config"]) if options["config"] else RunConfig()
    return config.with_overrides(
        seed=options["seed"],
        workers=options["workers"],
        out_dir=options["out"],
        settings=options["settings"],
    )


@click.group()
@click.option("--config", "config_path", type=click.Path(path_type=Path), help="Run config JSON")
@click.option("--seed", type=click.IntRange(min=0), help="Override the run seed")
@click.option("--workers", type=click.IntRange(min=1), help="Data-parallel stream workers")
@click.option("--out", type=click.Path(path_type=Path), help="Output directory")
@click.option("--verbose", "-v", is_flag=True, help="Enable debug logging")
@click.pass_context
def cli(
    ctx: click.Context,
    config_path: Optional[Path],
    seed: Optional[int],
    workers: Optional[int],
    out: Optional[Path],
    verbose: bool,
) -> None:
    """Local contrastive plasticity experiments."""
    load_dotenv()
    settings = RunSettings()
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    ctx.obj = {
        "config": config_path,
        "seed": seed,
        "workers": workers,
        "out": str(out) if out is not None else None,
        "verbose": verbose,
        "settings": settings,
    }


@cli.command()
@click.pass_context
def train(ctx: click.Context) -> None:
    """Train an encoder and write checkpoints, metrics and a summary."""
    try:
        result = TrainingExecutor(_resolve_config(ctx)).run()
        for epoch in result["epochs"]:
            click.echo(f"epoch {epoch['epoch']}: mean loss {epoch['mean_loss']:.6f}")
        click.echo(f"Artifacts written to {result['out_dir']}")
    except Exception as e:
        _fail(e, ctx.obj["verbose"])


@cli.command()
@click.argument("checkpoint", type=click.Path(path_type=Path))
@click.option("--layer", "layers", type=int, multiple=True, help="Layer to probe (repeatable, 0-based)")
@click.pass_context
def probe(ctx: click.Context, checkpoint: Path, layers: Tuple[int, ...]) -> None:
    """Fit linear probes on frozen features and write accuracy.csv."""
    try:
        result = ProbeExecutor(_resolve_config(ctx), checkpoint, list(layers) or None).run()
        for layer, split, accuracy in result["rows"]:
            click.echo(f"layer {layer} {split}: {accuracy:.4f}")
    except Exception as e:
        _fail(e, ctx.obj["verbose"])


@cli.command()
@click.option("--scope", help=f"'all' or comma-separated rules from {', '.join(RULES)}")
@click.option("--instances", type=click.IntRange(min=1), help="Random instances per rule")
@click.option("--master-seed", type=int, help="Seed of the instance generator")
@click.pass_context
def gradcheck(
    ctx: click.Context, scope: Optional[str], instances: Optional[int], master_seed: Optional[int]
) -> None:
    """Check every local rule against its independent gradient oracle."""
    try:
        verify = _resolve_config(ctx).verify
        if master_seed is None:
            master_seed = ctx.obj["seed"] if ctx.obj["seed"] is not None else verify.master_seed
        report = equivalence_report(
            scope or verify.scope,
            instances or verify.n_instances,
            master_seed,
        )
        click.echo(report.summary_text())
        if ctx.obj["out"]:
            write_report(report, Path(ctx.obj["out"]))
        assert_report(report)
    except Exception as e:
        _fail(e, ctx.obj["verbose"])


@cli.command("export-embeddings")
@click.argument("checkpoint", type=click.Path(path_type=Path))
@click.option("--layer", default=0, type=int, help="Layer whose pooled features are exported (0-based)")
@click.option("--output", type=click.Path(path_type=Path), help="CSV path (default: <out>/embeddings_layer<L>.csv)")
@click.pass_context
def export_embeddings(ctx: click.Context, checkpoint: Path, layer: int, output: Optional[Path]) -> None:
    """Write one CSV row per sample: id, label and pooled features."""
    try:
        result = ExportExecutor(_resolve_config(ctx), checkpoint, layer, output).run()
        click.echo(f"Wrote {result['rows']} rows to {result['path']}")
    except Exception as e:
        _fail(e, ctx.obj["verbose"])


@cli.command("stream-preview")
@click.option("-k", "count", default=20, type=click.IntRange(min=1), help="Number of events")
@click.pass_context
def stream_preview(ctx: click.Context, count: int) -> None:
    """Print the metadata of the first K stream events."""
    try:
        config = _resolve_config(ctx)
        dataset, _ = load_datasets(config)
        events = fixation_saccade_stream(
            dataset,
            config.stream.p_switch,
            count,
            worker_seeds(config.seed, 0)[0],
            config.grid,
            config.stream.column_pooling,
        )
        click.echo("t\tsource_id\tcolumn\tposition\ty\tlabel")
        for event in events:
            label = "" if event.label is None else event.label
            click.echo(f"{event.t}\t{event.source_id}\t{event.column}\t{event.position}\t{event.y:+d}\t{label}")
    except Exception as e:
        _fail(e, ctx.obj["verbose"])


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
