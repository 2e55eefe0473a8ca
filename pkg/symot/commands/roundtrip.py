import click

from ..errors import EXIT_NUMERIC
from ..flow import load_checkpoint, roundtrip_error
from ..seeding import rng_for
from ..training import ROUNDTRIP_TOLERANCE
from .common import CommandFailed, cli_errors

BOX = 4.0


@click.command("roundtrip")
@click.option("--checkpoint", type=click.Path(dir_okay=False), required=True)
@click.option("--n", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
def roundtrip(checkpoint, n, seed):
    """Check T^-1(T(x)) = x on n uniform points in [-4, 4]^d."""
    with cli_errors():
        model, _, _ = load_checkpoint(checkpoint)
        x = rng_for(seed, "roundtrip").uniform(-BOX, BOX, size=(n, model.dim))
        error = roundtrip_error(model, x)
    click.echo(f"max roundtrip error {error:.3e} over {n} points")
    if not error < ROUNDTRIP_TOLERANCE:
        raise CommandFailed(f"roundtrip error {error:.3e} exceeds {ROUNDTRIP_TOLERANCE:g}", EXIT_NUMERIC)
