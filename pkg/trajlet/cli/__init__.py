"""
trajlet.cli

Command line interface: one ``trajlet`` group with a subcommand per stage
of the pipeline.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import logging
import os

import click

from ..parallel import THREADS_ENV, set_threads


class MagicGroup(click.Group):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.context_settings = {
            "help_option_names": ["-h", "--help"],
        }

    def _load_commands(self):
        # delaying to avoid circular imports
        from . import gendata
        from . import sim
        from . import train
        from . import embed
        from . import query
        from . import evaluate
        from . import baseline
        from . import sweep
        from . import params

    def get_command(self, ctx, cmd_name):
        self._load_commands()
        return super().get_command(ctx, cmd_name)

    def list_commands(self, ctx):
        self._load_commands()
        return super().list_commands(ctx)


@click.group(cls=MagicGroup)
@click.option(
    '--threads', type=click.IntRange(min=1), envvar=THREADS_ENV, default=None,
    help="Cap on worker threads for parallel maps")
def main(threads=None):
    """
    trajlet - Learn trajectory embeddings with a contrastive Transformer
    encoder, and retrieve similar trajectories from an embedding bank.

    Every command is deterministic given its seed. Set LOGLEVEL to see
    progress logging.
    """

    log_level = os.environ.get('LOGLEVEL', '').strip().upper()
    if log_level:
        logging.basicConfig(level=log_level)

    set_threads(threads)


# The end.
