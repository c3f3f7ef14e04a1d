"""
trajlet.cli.baseline

Score the heuristic retrieval baselines on the same footing as learned
retrieval.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import click

from . import main
from ..baselines import EndpointEngine, MatrixEngine, MultipointEngine
from ..evaluation import evaluate_engine, write_report
from ..models import RotationAnchor
from ..retrieval import normalize_all
from .util import catchall, display_report, load_data, resplit


ENGINES = {
    'matrix': MatrixEngine,
    'endpoint': EndpointEngine,
    'multipoint': MultipointEngine,
}


def build_baseline(kind, trajectories, anchor, waypoints=None):
    pool = normalize_all(trajectories, anchor)
    if kind == 'multipoint':
        return MultipointEngine(pool, waypoints, anchor=anchor)
    return ENGINES[kind](pool, anchor=anchor)


def parse_waypoints(values):
    if not values:
        return None
    try:
        return [int(v) for v in resplit(values)]
    except ValueError:
        raise click.BadParameter("waypoints must be integers",
                                 param_hint="'--waypoints'") from None


@main.command()
@click.argument('kind', type=click.Choice(list(ENGINES)))
@click.option(
    '--data', '-d', metavar='PATH', multiple=True, required=True,
    help="Trajectory files or directories forming the bank")
@click.option(
    '--queries', '-q', metavar='PATH', multiple=True, required=True,
    help="Trajectory files holding the queries")
@click.option(
    '-k', 'k', type=click.IntRange(min=1), default=6, show_default=True,
    help="Candidates per query")
@click.option(
    '--report', metavar='FILE', default=None,
    help="Write the JSON report here")
@click.option(
    '--anchor', type=click.Choice([a.value for a in RotationAnchor]),
    default=RotationAnchor.DISPLACEMENT.value, show_default=True,
    help="Rotation anchor used to normalize trajectories")
@click.option(
    '--waypoints', metavar='INDEXES', multiple=True,
    help="Point indexes the multipoint baseline matches on")
@click.option(
    '--recursive', '-r', is_flag=True, default=False,
    help="Search data directories recursively")
@catchall
def baseline(kind, data, queries, k=6, report=None,
             anchor='displacement', waypoints=(), recursive=False):
    """
    Evaluate a heuristic baseline: KIND is one of matrix (precomputed ADE
    between every bank pair), endpoint (k-d tree over final points) or
    multipoint (k-d trees over several points of the path).
    """

    rotation = RotationAnchor(anchor)
    engine = build_baseline(kind, load_data(data, recursive), rotation,
                            parse_waypoints(waypoints))

    result = evaluate_engine(engine, load_data(queries), k)
    if report:
        write_report(result, report)

    display_report(result)


# The end.
