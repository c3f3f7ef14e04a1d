"""
trajlet.cli.embed

Build an embedding bank from a checkpoint.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import click

from . import main
from ..checkpoint import load_checkpoint
from ..retrieval import build_bank, save_bank
from .theme import select_theme
from .util import catchall, load_data, write_csv


def embedding_rows(bank):
    """
    One ``id, label, e0 .. e{d-1}`` row per bank member.
    """

    for traj_id, nt, row in zip(bank.ids, bank.trajectories, bank.embeddings):
        yield [traj_id, nt.label or "", *(repr(float(v)) for v in row)]


@main.command()
@click.option(
    '--ckpt', metavar='PATH', required=True,
    help="Checkpoint file or directory")
@click.option(
    '--data', '-d', metavar='PATH', multiple=True, required=True,
    help="Trajectory files or directories to embed")
@click.option(
    '--out', '-o', metavar='DIR', required=True,
    help="Directory to write the bank into")
@click.option(
    '--recursive', '-r', is_flag=True, default=False,
    help="Search data directories recursively")
@click.option(
    '--emit-csv', 'emit_csv', metavar='FILE', default=None,
    help="Also write id, label and embedding components as CSV")
@catchall
def embed(ckpt, data, out, recursive=False, emit_csv=None):
    """
    Embed every trajectory of DATA with the checkpoint and save the bank
    to OUT.

    The bank keeps the normalized trajectories beside the embeddings so
    retrieval results can be scored without the source files.
    """

    checkpoint = load_checkpoint(ckpt)
    trajectories = load_data(data, recursive)

    bank = build_bank(trajectories, checkpoint)
    path = save_bank(bank, out)

    if emit_csv:
        header = ['id', 'label', *(f'e{i}' for i in range(bank.d_emb))]
        write_csv(emit_csv, header, embedding_rows(bank))

    select_theme().secho(f"Embedded {len(bank)} trajectories into {path}",
                         tp='summary_text')


# The end.
