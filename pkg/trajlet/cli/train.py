"""
trajlet.cli.train

Train an encoder with the contrastive triplet objective.

:author: trajlet contributors
:license: GNU General Public License v3
"""


from pathlib import Path

import click

from . import main
from ..checkpoint import CHECKPOINT_FILE
from ..models import EncoderConfig, Metric, Mining, RotationAnchor, TrainConfig
from ..retrieval import normalize_all
from ..training import Trainer
from .util import (
    catchall, display_train_summary, load_config_sections, load_data,
    merge_config,
)


TRAIN_LOG = 'train.log'


def build_configs(config=None, **flags):
    """
    The encoder and training configuration of a run: model defaults,
    updated by the ``encoder`` and ``train`` sections of the ``config``
    file, updated by every flag that was given.
    """

    sections = load_config_sections(config, ('encoder', 'train'))

    encoder = merge_config(
        EncoderConfig, sections['encoder'], config,
        num_heads=flags.get('heads'),
        num_layers=flags.get('layers'),
        d_model=flags.get('d_model'),
        d_emb=flags.get('d_emb'))

    train = merge_config(
        TrainConfig, sections['train'], config,
        metric=flags.get('metric'),
        alpha=flags.get('alpha'),
        anchor=flags.get('anchor'),
        steps=flags.get('steps'),
        seed=flags.get('seed'),
        batch_size=flags.get('batch_size'),
        margin=flags.get('margin'),
        sim_threshold=flags.get('threshold'),
        mining=flags.get('mining'),
        lr_max=flags.get('lr_max'),
        input_dropout_p=flags.get('input_dropout'),
        attn_dropout_p=flags.get('attn_dropout'),
        checkpoint_every=flags.get('checkpoint_every'))

    return encoder, train


@main.command()
@click.option(
    '--data', '-d', metavar='PATH', multiple=True, required=True,
    help="Trajectory files or directories to train on")
@click.option(
    '--out', '-o', metavar='DIR', required=True,
    help="Directory for the checkpoint and training log")
@click.option(
    '--config', '-c', metavar='FILE', default=None,
    help="YAML file with 'encoder' and 'train' sections")
@click.option(
    '--recursive', '-r', is_flag=True, default=False,
    help="Search data directories recursively")
@click.option(
    '--metric', type=click.Choice([m.value for m in Metric]), default=None,
    help="Input-space similarity metric [default: cosine]")
@click.option(
    '--alpha', type=float, default=None,
    help="Distance weight of the cosine metric [default: 0.5]")
@click.option(
    '--anchor', type=click.Choice([a.value for a in RotationAnchor]), default=None,
    help="Rotation anchor for normalization [default: displacement]")
@click.option('--heads', type=int, default=None, help="Attention heads [default: 4]")
@click.option('--layers', type=int, default=None, help="Encoder layers [default: 1]")
@click.option('--d-model', 'd_model', type=int, default=None, help="Model width [default: 512]")
@click.option('--d-emb', 'd_emb', type=int, default=None, help="Embedding size [default: 16]")
@click.option('--steps', type=int, default=None, help="Optimizer steps [default: 1000]")
@click.option('--seed', type=int, default=None, help="Run seed [default: 0]")
@click.option('--batch-size', 'batch_size', type=int, default=None, help="Batch size [default: 256]")
@click.option('--margin', type=float, default=None, help="Triplet margin [default: 0.5]")
@click.option(
    '--threshold', type=float, default=None,
    help="Positive similarity threshold [default: 0.7]")
@click.option(
    '--mining', type=click.Choice([m.value for m in Mining]), default=None,
    help="Triplet mining strategy [default: random]")
@click.option('--lr-max', 'lr_max', type=float, default=None, help="Peak learning rate [default: 1e-3]")
@click.option(
    '--input-dropout', 'input_dropout', type=float, default=None,
    help="Override the encoder input dropout")
@click.option(
    '--attn-dropout', 'attn_dropout', type=float, default=None,
    help="Override the encoder attention dropout")
@click.option(
    '--checkpoint-every', 'checkpoint_every', type=int, default=None,
    help="Also write a checkpoint every N steps")
@catchall
def train(data, out, config=None, recursive=False,
          metric=None, alpha=None, anchor=None,
          heads=None, layers=None, d_model=None, d_emb=None,
          steps=None, seed=None, batch_size=None, margin=None,
          threshold=None, mining=None, lr_max=None,
          input_dropout=None, attn_dropout=None, checkpoint_every=None):
    """
    Train a Transformer trajectory encoder on DATA and write the checkpoint
    to OUT.

    Settings come from the model defaults, then the --config file, then
    any flag given on the command line. One record per step is written to
    OUT/train.log.
    """

    encoder_config, train_config = build_configs(
        config, metric=metric, alpha=alpha, anchor=anchor,
        heads=heads, layers=layers, d_model=d_model, d_emb=d_emb,
        steps=steps, seed=seed, batch_size=batch_size, margin=margin,
        threshold=threshold, mining=mining, lr_max=lr_max,
        input_dropout=input_dropout, attn_dropout=attn_dropout,
        checkpoint_every=checkpoint_every)

    trajectories = load_data(data, recursive)
    pool = normalize_all(trajectories, RotationAnchor(train_config.anchor))

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)

    with open(out_dir / TRAIN_LOG, 'w', encoding='utf-8') as log:
        trainer = Trainer(pool, train_config, encoder_config, out_dir, log)
        summary = trainer.run()

    display_train_summary(summary, out_dir / CHECKPOINT_FILE)


# The end.
