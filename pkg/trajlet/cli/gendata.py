"""
trajlet.cli.gendata

Generate a labelled synthetic maneuver set.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import click

from . import main
from ..loader import save_trajectories
from ..synth import generate, load_dataset_spec
from .theme import select_theme
from .util import catchall


@main.command('gen-data')
@click.option(
    '--spec', 'spec', metavar='SPEC', required=True,
    help="Dataset spec, YAML or JSON")
@click.option(
    '--out', 'out', metavar='FILE', required=True,
    help="Trajectory file to write")
@catchall
def gendata(spec, out):
    """
    Generate synthetic trajectories from a dataset SPEC and write them to
    a .trj file.

    The spec lists maneuver families (straight, left-turn, right-turn,
    lane-change-left, lane-change-right, u-turn) with their counts, and
    ranges for speed and curvature. Output is identical for the same spec.
    """

    dataset = load_dataset_spec(spec)
    trajectories = generate(dataset)
    count = save_trajectories(trajectories, out, header=f"generated from {spec}")

    select_theme().secho(f"Wrote {count} trajectories to {out}", tp='summary_text')


# The end.
