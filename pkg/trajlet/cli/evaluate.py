"""
trajlet.cli.evaluate

Score learned retrieval with the displacement metrics.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import click

from . import main
from ..checkpoint import load_checkpoint
from ..evaluation import evaluate_engine, write_report
from ..retrieval import load_bank
from .query import build_engine
from .util import catchall, display_report, load_data


@main.command('eval')
@click.option(
    '--bank', '-b', metavar='DIR', required=True,
    help="Bank directory written by 'trajlet embed'")
@click.option(
    '--ckpt', metavar='PATH', required=True,
    help="Checkpoint the bank was built with")
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
    '--ivf', metavar='NLIST,NPROBE', default=None,
    help="Search through an IVF index instead of exactly")
@click.option(
    '--seed', type=int, default=0, show_default=True,
    help="Seed of the IVF k-means")
@catchall
def evaluate(bank, ckpt, queries, k=6, report=None, ivf=None, seed=0):
    """
    Retrieve K candidates from the bank for every query and report minADE,
    avgADE, minFDE and avgFDE, plus top-K label purity when the queries are
    labelled.
    """

    embedding_bank = load_bank(bank)
    checkpoint = load_checkpoint(ckpt)
    engine = build_engine(embedding_bank, checkpoint, ivf, seed)

    result = evaluate_engine(engine, load_data(queries), k)
    if report:
        write_report(result, report)

    display_report(result)


# The end.
