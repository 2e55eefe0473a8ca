import click

from .. import registry
from .common import AppState, cli_errors, pass_state


@click.command("runs")
@click.option("--limit", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--name", default=None, help="Only runs of this experiment.")
@pass_state
def runs(state: AppState, limit, name):
    """List registered runs, newest first."""
    if state.registry_url is None:
        raise click.UsageError("no registry configured (use --registry or SYMOT_REGISTRY)")
    with cli_errors(), state.registry() as db:
        rows = registry.list_runs(db, limit=limit, name=name)
    if not rows:
        click.echo("no runs")
        return
    click.echo(f"{'id':>4}  {'name':<24} {'command':<7} {'method':<26} {'beta':>8}  {'ot_fwd':>8}  {'mmd_fwd':>8}")
    for run in rows:
        beta = "-" if run.beta is None else f"{run.beta:.0e}"
        ot = "-" if run.ot_fwd is None else f"{run.ot_fwd:.4g}"
        mmd = "-" if run.mmd_fwd is None else f"{run.mmd_fwd:.3g}"
        click.echo(f"{run.id:>4}  {run.name:<24} {run.command:<7} {run.method:<26} {beta:>8}  {ot:>8}  {mmd:>8}")
