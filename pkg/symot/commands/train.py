import logging
import time
from pathlib import Path

import click

from .. import __version__, data, registry
from ..config import load_experiment
from ..evaluation import evaluate, export_correspondence, metrics_row, scatter_arrays, write_metrics
from ..flow import save_checkpoint
from ..plotting import write_scatter_svg
from ..schemas import DatasetRecord, ExperimentConfig, RunManifest
from ..training import default_bank, train as train_flow, write_trace
from .common import AppState, cli_errors, pass_state

logger = logging.getLogger(__name__)


def checkpoint_meta(config: ExperimentConfig) -> dict[str, str]:
    return {
        "dataset": config.experiment.name,
        "beta": repr(config.train.beta),
        "symmetric": "true" if config.train.symmetric else "false",
        "seed": str(config.train.seed),
        "config_hash": config.fingerprint(),
    }


def _dataset_records(config: ExperimentConfig, out_dir: Path, sets: data.ExperimentData) -> dict[str, DatasetRecord]:
    seed = config.experiment.seed
    records = {}
    for name, points, source, default_seed, split in (
        ("source_train", sets.x_train, config.data.source, seed, "train"),
        ("target_train", sets.z_train, config.data.target, seed + 1, "train"),
        ("source_test", sets.x_test, config.data.source, seed, "test"),
        ("target_test", sets.z_test, config.data.target, seed + 1, "test"),
    ):
        path = data.save(out_dir / f"{name}.csv", points)
        given = source.path if split == "train" else source.test_path
        spec = None if given else source.to_spec(default_seed, split, n=None if split == "train" else config.data.test_n)
        records[name] = DatasetRecord(path=str(path), sha256=data.dataset_hash(path), rows=len(points), spec=spec)
    return records


@click.command("train")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Experiment config (.cfg) or a run manifest (.json).")
@click.option("--override", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Applied after the file; bare keys mean train.KEY (e.g. beta=0).")
@click.option("--out-dir", type=click.Path(file_okay=False), default=None, help="Defaults to experiment.out_dir.")
@click.option("--progress/--no-progress", default=False, help="Show an epoch progress bar.")
@pass_state
def train(state: AppState, config_path, overrides, out_dir, progress):
    """Train a flow from a config; writes checkpoint, trace, metrics and manifest."""
    started = time.perf_counter()
    with cli_errors():
        config = load_experiment(config_path, overrides)
        out = Path(out_dir or config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        logger.info("experiment %s (config %s) -> %s", config.experiment.name, config.fingerprint(), out)

        sets = data.prepare_data(config)
        records = _dataset_records(config, out, sets)
        bank = default_bank(sets.x_train, sets.z_train, config.train)
        meta = checkpoint_meta(config)

        checkpoints = []

        def on_epoch_end(epoch, model, summary):
            every = config.train.checkpoint_every
            if every and epoch % every == 0:
                checkpoints.append(str(save_checkpoint(model, out / f"model_epoch{epoch:04d}.ckpt", bank, meta)))

        model, trace = train_flow(
            sets.x_train, sets.z_train, config.train, bank=bank, on_epoch_end=on_epoch_end, progress=progress
        )
        checkpoints.append(str(save_checkpoint(model, out / "model.ckpt", bank, meta)))
        trace_path = write_trace(out / "trace.csv", trace)

        report = evaluate(model, bank, sets.x_test, sets.z_test, config_hash=config.fingerprint())
        row = metrics_row(report, config.experiment.name, config.train.beta, config.train.symmetric, config.train.seed)
        metrics_paths = [str(write_metrics(out / "metrics.csv", [row]))]
        if config.eval.correspondence:
            metrics_paths.append(str(export_correspondence(model, sets.x_test, sets.z_test, out / "correspondence.csv")))
        if config.eval.svg:
            metrics_paths.append(str(write_scatter_svg(out / "scatter.svg", *scatter_arrays(model, sets.x_test, sets.z_test))))

        manifest = RunManifest(
            library_version=__version__,
            config=config,
            config_hash=config.fingerprint(),
            datasets=records,
            checkpoints=checkpoints,
            trace_path=str(trace_path),
            metrics_paths=metrics_paths,
            wall_clock_seconds=round(time.perf_counter() - started, 3),
        )
        (out / "manifest.json").write_text(manifest.model_dump_json(indent=2) + "\n")

        with state.registry() as db:
            if db is not None:
                registry.record_run(
                    db,
                    name=config.experiment.name,
                    command="train",
                    method=row.method,
                    dataset=config.experiment.name,
                    beta=config.train.beta,
                    symmetric=config.train.symmetric,
                    seed=config.train.seed,
                    config_hash=config.fingerprint(),
                    checkpoint_path=checkpoints[-1],
                    report=report,
                )

    click.echo(f"wrote {out}")
    click.echo(
        f"ot_fwd={report.ot_fwd:.4g} ot_bwd={report.ot_bwd:.4g} "
        f"mmd_fwd={report.mmd_fwd:.3g} mmd_bwd={report.mmd_bwd:.3g}"
    )
