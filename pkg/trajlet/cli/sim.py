"""
trajlet.cli.sim

Dump the pairwise input-space similarity matrix of a trajectory file.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import click

from . import main
from ..models import Metric, RotationAnchor
from ..retrieval import normalize_all
from ..similarity import similarity_matrix
from .util import catchall, load_data, write_csv


@main.command()
@click.argument('data', metavar='DATA')
@click.argument('out', metavar='OUT')
@click.option(
    '--metric', type=click.Choice([m.value for m in Metric]),
    default=Metric.COSINE.value, show_default=True,
    help="Similarity metric")
@click.option(
    '--alpha', type=float, default=0.5, show_default=True,
    help="Distance weight of the cosine metric")
@click.option(
    '--anchor', type=click.Choice([a.value for a in RotationAnchor]),
    default=RotationAnchor.DISPLACEMENT.value, show_default=True,
    help="Rotation anchor used to normalize the trajectories")
@click.option(
    '--limit', type=click.IntRange(min=1), default=None,
    help="Only use the first LIMIT trajectories")
@catchall
def sim(data, out, metric='cosine', alpha=0.5, anchor='displacement',
        limit=None):
    """
    Write the similarity matrix of the trajectories in DATA to OUT as CSV.

    The first row and first column hold the trajectory ids. The matrix is
    symmetric with a diagonal of exactly 1.
    """

    trajectories = load_data([data])
    if limit is not None:
        trajectories = trajectories[:limit]

    normalized = normalize_all(trajectories, RotationAnchor(anchor))
    matrix = similarity_matrix(normalized, Metric(metric), alpha)

    ids = [nt.source_id for nt in normalized]
    rows = ([traj_id, *(repr(float(v)) for v in row)]
            for traj_id, row in zip(ids, matrix.values))
    write_csv(out, ['id', *ids], rows)


# The end.
