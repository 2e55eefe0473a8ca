import logging
import sys

import click

from . import __version__
from .commands import evaluate, generate, roundtrip, runs, sweep, train
from .commands.common import AppState
from .errors import EXIT_USAGE

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class SymotGroup(click.Group):
    """Click group whose usage errors exit with 1 instead of click's 2 (2 means I/O here)."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        if not standalone_mode:
            return super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        try:
            result = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.UsageError as exc:
            exc.show()
            sys.exit(EXIT_USAGE)
        except click.ClickException as exc:
            exc.show()
            sys.exit(exc.exit_code)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        sys.exit(result if isinstance(result, int) else 0)


def configure_logging(level: int) -> None:
    logger = logging.getLogger("symot")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    # bound to the current stderr, which changes between in-process invocations
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(handler)
    logger.setLevel(level)


@click.group(cls=SymotGroup)
@click.version_option(__version__, prog_name="symot")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
@click.option("-q", "--quiet", is_flag=True, help="Warnings and errors only.")
@click.option(
    "--registry",
    envvar="SYMOT_REGISTRY",
    default=None,
    metavar="URL",
    help="SQLAlchemy URL of the run registry, e.g. sqlite:///runs/registry.db.",
)
@click.pass_context
def cli(ctx: click.Context, verbose: bool, quiet: bool, registry):
    """Train and evaluate symmetric OT-regularised flows between 2-D point clouds."""
    if verbose and quiet:
        raise click.UsageError("--verbose and --quiet are mutually exclusive")
    configure_logging(logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO)
    ctx.obj = AppState(registry_url=registry)


cli.add_command(generate.generate)
cli.add_command(train.train)
cli.add_command(evaluate.evaluate)
cli.add_command(sweep.sweep)
cli.add_command(roundtrip.roundtrip)
cli.add_command(runs.runs)


if __name__ == "__main__":
    cli(prog_name="symot")
