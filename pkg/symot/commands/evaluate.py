import logging
import math
from pathlib import Path

import click

from .. import data, registry
from ..evaluation import evaluate as evaluate_flow
from ..evaluation import export_correspondence, metrics_row, scatter_arrays, write_metrics
from ..flow import load_checkpoint
from ..kernels import DEFAULT_SCALES, KernelBank, median_heuristic
from ..plotting import write_scatter_svg
from .common import AppState, cli_errors, pass_state

logger = logging.getLogger(__name__)

FILE = click.Path(dir_okay=False)


@click.command("eval")
@click.option("--checkpoint", type=FILE, required=True)
@click.option("--source", type=FILE, required=True, help="Held-out source points (CSV).")
@click.option("--target", type=FILE, required=True, help="Held-out target points (CSV).")
@click.option("--metrics", type=FILE, default=None, help="Metrics CSV path; defaults to <checkpoint>_metrics.csv.")
@click.option("--correspondence", type=FILE, default=None, help="Correspondence CSV path; defaults to <checkpoint>_correspondence.csv.")
@click.option("--svg", type=FILE, default=None, help="Write a scatter plot SVG here.")
@pass_state
def evaluate(state: AppState, checkpoint, source, target, metrics, correspondence, svg):
    """Print forward/backward OT cost and MMD distance of a checkpoint on two point sets."""
    with cli_errors():
        model, bank, meta = load_checkpoint(checkpoint)
        x = data.load(source)
        z = data.load(target)
        if bank is None:
            bank = KernelBank.from_median(median_heuristic(x, z), DEFAULT_SCALES)
            logger.warning("checkpoint carries no kernel bank; using the median heuristic on the given sets")

        report = evaluate_flow(model, bank, x, z, config_hash=meta.get("config_hash", ""))
        beta = float(meta.get("beta", "nan"))
        symmetric = meta.get("symmetric", "true") == "true"
        seed = int(meta.get("seed", "0"))
        row = metrics_row(report, meta.get("dataset", "unknown"), beta, symmetric, seed)
        stem = Path(checkpoint).with_suffix("")
        write_metrics(metrics or f"{stem}_metrics.csv", [row])
        export_correspondence(model, x, z, correspondence or f"{stem}_correspondence.csv")
        if svg:
            write_scatter_svg(svg, *scatter_arrays(model, x, z))

        with state.registry() as db:
            if db is not None:
                registry.record_run(
                    db,
                    name=row.dataset,
                    command="eval",
                    method=row.method,
                    dataset=row.dataset,
                    beta=None if math.isnan(beta) else beta,
                    symmetric=symmetric,
                    seed=seed,
                    config_hash=report.config_hash,
                    checkpoint_path=str(checkpoint),
                    report=report,
                )

    for name in ("ot_fwd", "ot_bwd", "mmd_fwd", "mmd_bwd"):
        click.echo(f"{name} {getattr(report, name):.17g}")
    logger.info("direction gap (ot): %.3g", report.direction_gap)
