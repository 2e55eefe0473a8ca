import logging
from typing import get_args

import click

from .. import data
from ..schemas import DatasetKind, DatasetSpec
from .common import cli_errors

logger = logging.getLogger(__name__)


@click.command("generate")
@click.option("--kind", type=click.Choice(get_args(DatasetKind)), required=True)
@click.option("--n", type=click.IntRange(min=1), default=2000, show_default=True)
@click.option("--noise", type=click.FloatRange(min=0), default=None, help="Jitter / component std; kind default if omitted.")
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--split", type=click.Choice(["train", "test"]), default="train", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, writable=True), required=True)
def generate(kind, n, noise, seed, split, out):
    """Write a seeded toy dataset as CSV and print its sha256."""
    with cli_errors():
        spec = DatasetSpec(kind=kind, n=n, noise=noise, seed=seed, split=split)
        path = data.save(out, data.generate(spec))
        digest = data.dataset_hash(path)
    logger.info("wrote %d %s points to %s", n, kind, path)
    click.echo(f"{digest}  {path}")
