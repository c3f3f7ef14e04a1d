"""
trajlet.cli.sweep

Train and evaluate a grid of encoder configurations.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import click

from . import main
from ..loader import load_yaml
from ..models import SweepSpec, parse_model, replace_model
from ..workflow import run_sweep
from .theme import select_theme
from .util import catchall


def load_sweep_spec(filename, out=None):
    spec = parse_model(SweepSpec, load_yaml(filename) or {},
                       what="sweep", filename=filename)
    if out is not None:
        spec = replace_model(spec, out=out)
    return spec


@main.command()
@click.argument('spec', metavar='SPEC')
@click.option(
    '--out', '-o', metavar='DIR', default=None,
    help="Output directory, overriding the spec's 'out'")
@catchall
def sweep(spec, out=None):
    """
    Run every point of the sweep described by the YAML file SPEC.

    Each point trains an encoder, embeds the bank and evaluates it. A
    point that fails is recorded with its error category and the sweep
    continues. Results go to OUT/sweep.csv, one row per point.
    """

    theme = select_theme()
    sweep_spec = load_sweep_spec(spec, out)

    def point_done(row):
        name = ' '.join(row.values()[:6])
        tp = 'status_ok' if row.status == 'ok' else 'status_failed'
        click.echo(f"{name}: {theme.style(row.status, tp=tp)}")

    rows = run_sweep(sweep_spec, point_callback=point_done)

    failed = sum(1 for row in rows if row.status != 'ok')
    theme.secho(f"Swept {len(rows)} points ({failed} failed),"
                f" results in {sweep_spec.out}/sweep.csv", tp='summary_text')


# The end.
