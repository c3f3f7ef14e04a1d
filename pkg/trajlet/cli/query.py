"""
trajlet.cli.query

Retrieve the nearest bank trajectories of each query trajectory.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import click

from . import main
from ..checkpoint import load_checkpoint
from ..evaluation import EmbeddingEngine
from ..retrieval import build_ivf, load_bank, normalize_all
from .theme import select_theme
from .util import catchall, load_data, parse_ivf, write_csv


QUERY_COLUMNS = ('query_id', 'rank', 'neighbor_id', 'distance', 'similarity')


def build_engine(bank, checkpoint, ivf=None, seed=0):
    """
    An :class:`EmbeddingEngine` over ``bank``, exact unless ``ivf`` gives
    ``nlist,nprobe``.
    """

    spec = parse_ivf(ivf)
    if spec is None:
        return EmbeddingEngine(bank, checkpoint)

    nlist, nprobe = spec
    if nprobe > nlist:
        raise click.BadParameter(f"nprobe {nprobe} exceeds nlist {nlist}",
                                 param_hint="'--ivf'")
    index = build_ivf(bank, nlist, seed)
    return EmbeddingEngine(bank, checkpoint, index, nprobe)


def result_rows(query_id, result):
    for rank, (neighbor, dist) in enumerate(zip(result.ids, result.distances), 1):
        dist = float(dist)
        yield [query_id, rank, neighbor, repr(dist), repr(1.0 - dist * dist / 2.0)]


@main.command()
@click.option(
    '--bank', '-b', metavar='DIR', required=True,
    help="Bank directory written by 'trajlet embed'")
@click.option(
    '--ckpt', metavar='PATH', required=True,
    help="Checkpoint the bank was built with")
@click.option(
    '--query', '-q', metavar='PATH', multiple=True, required=True,
    help="Trajectory files holding the queries")
@click.option(
    '-k', 'k', type=click.IntRange(min=1), default=6, show_default=True,
    help="Neighbors per query")
@click.option(
    '--ivf', metavar='NLIST,NPROBE', default=None,
    help="Search through an IVF index instead of exactly")
@click.option(
    '--seed', type=int, default=0, show_default=True,
    help="Seed of the IVF k-means")
@click.option(
    '--emit-csv', 'emit_csv', metavar='FILE', default=None,
    help="Write every neighbor as a CSV row")
@catchall
def query(bank, ckpt, query, k=6, ivf=None, seed=0, emit_csv=None):
    """
    Find the K nearest bank trajectories of every trajectory in QUERY.

    Distances are Euclidean between unit embeddings, and the similarity
    column is the matching cosine, 1 - d^2 / 2.
    """

    theme = select_theme()
    style = theme.style

    embedding_bank = load_bank(bank)
    checkpoint = load_checkpoint(ckpt)
    engine = build_engine(embedding_bank, checkpoint, ivf, seed)

    queries = normalize_all(load_data(query), engine.anchor)

    rows = []
    for nt in queries:
        result = engine.search(nt, k)
        theme.secho(nt.source_id, tp='heading')
        for neighbor, dist in zip(result.ids, result.distances):
            click.echo(f"  {style(neighbor, tp='traj_id')}"
                       f" {style(f'{float(dist):.6f}', tp='value')}")
        rows.extend(result_rows(nt.source_id, result))

    if emit_csv:
        write_csv(emit_csv, QUERY_COLUMNS, rows)


# The end.
