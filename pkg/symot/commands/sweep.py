import logging
from pathlib import Path

import click

from .. import registry
from ..config import load_experiment
from ..data import prepare_data
from ..errors import SweepError
from ..evaluation import format_sweep_table, sweep_beta, write_sweep
from ..plotting import write_sweep_svg
from ..training import default_bank
from .common import AppState, CommandFailed, cli_errors, float_list, pass_state

logger = logging.getLogger(__name__)


@click.command("sweep")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--betas", required=True, help="Comma-separated weights, e.g. 1e-5,1e-4,1e-3.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV path; defaults to <out_dir>/sweep.csv.")
@click.option("--svg", type=click.Path(dir_okay=False), default=None, help="Also plot the sweep to this SVG.")
@click.option("--override", "overrides", multiple=True, metavar="KEY=VALUE")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Parallel beta points (default: SYMOT_THREADS or 1).")
@pass_state
def sweep(state: AppState, config_path, betas, out, svg, overrides, threads):
    """Train one model per beta with everything else fixed; write beta,ot,mmd rows."""
    values = float_list(betas)
    if not values:
        raise click.UsageError("--betas is empty")

    with cli_errors():
        config = load_experiment(config_path, overrides)
        out = Path(out or Path(config.out_dir) / "sweep.csv")
        out.parent.mkdir(parents=True, exist_ok=True)
        sets = prepare_data(config)
        bank = default_bank(sets.x_train, sets.z_train, config.train)

        with state.registry() as db:
            record = registry.start_sweep(db, config.experiment.name, config.fingerprint()) if db is not None else None

            def on_row(row):
                if record is not None:
                    registry.record_sweep_point(db, record, row.beta, row=row)

            def on_failure(beta, reason):
                if record is not None:
                    registry.record_sweep_point(db, record, beta, error=reason)

            try:
                rows = sweep_beta(
                    config.train, values, sets, bank=bank, threads=threads, on_row=on_row, on_failure=on_failure
                )
            except SweepError as exc:
                write_sweep(out, exc.rows)
                if svg and exc.rows:
                    write_sweep_svg(svg, exc.rows)
                if record is not None:
                    registry.finish_sweep(db, record, failed=True)
                if exc.rows:
                    click.echo(format_sweep_table(exc.rows))
                click.echo(f"partial results ({len(exc.rows)} of {len(values)}) written to {out}", err=True)
                raise CommandFailed(str(exc), exc.exit_code) from exc
            if record is not None:
                registry.finish_sweep(db, record, failed=False)

        write_sweep(out, rows)
        if svg:
            write_sweep_svg(svg, rows)

    click.echo(format_sweep_table(rows))
    logger.info("wrote %s", out)
