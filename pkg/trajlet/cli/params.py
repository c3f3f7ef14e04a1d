"""
trajlet.cli.params

Report the learnable parameter count of an encoder shape.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import click

from . import main
from ..encoder import parameter_count
from ..models import EncoderConfig, TokenLayout, parse_model
from .util import catchall


@main.command()
@click.option('--heads', type=int, default=4, show_default=True, help="Attention heads")
@click.option('--layers', type=int, default=1, show_default=True, help="Encoder layers")
@click.option('--d-model', 'd_model', type=int, default=512, show_default=True, help="Model width")
@click.option('--d-emb', 'd_emb', type=int, default=16, show_default=True, help="Embedding size")
@click.option(
    '--d-ffn', 'd_ffn', type=int, default=None,
    help="Feed-forward width [default: 4 x d-model]")
@click.option(
    '--token-layout', 'token_layout', type=click.Choice([t.value for t in TokenLayout]),
    default=TokenLayout.POINT.value, show_default=True,
    help="One token per point, or one per coordinate")
@catchall
def params(heads=4, layers=1, d_model=512, d_emb=16, d_ffn=None,
           token_layout='point-tokens'):
    """
    Print the number of learnable parameters of an encoder.
    """

    config = parse_model(EncoderConfig, {
        'num_heads': heads,
        'num_layers': layers,
        'd_model': d_model,
        'd_emb': d_emb,
        'd_ffn': d_ffn,
        'token_layout': token_layout,
    }, what="encoder")

    click.echo(parameter_count(config))


# The end.
