"""
trajlet.training

The contrastive training loop: batch sampling, similarity labelling,
triplet mining, the triplet loss, Adam updates under a one-cycle learning
rate schedule, the training log, and checkpoints.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import logging
from dataclasses import dataclass, field, fields
from enum import Enum
from math import cos, pi
from pathlib import Path
from typing import (
    Any, Callable, Dict, List, Optional, Sequence, TextIO, Tuple, Union,
)

import numpy as np

from .checkpoint import Checkpoint, save_checkpoint
from .core import NormalizedTrajectory
from .encoder import (
    EncoderParams, ParamGradients, backward, encode_input, forward_batch,
    normalize_embeddings, normalize_embeddings_backward,
)
from .exceptions import (
    NoTripletsInBatch, NonFiniteLoss, PoolTooSmall, TrajletError,
)
from .loader import yaml_line
from .mining import (
    batch_triplet_loss, cap_triplets, mine_dynamic, mine_random,
)
from .models import (
    EncoderConfig, Metric, Mining, MiningPhase, RotationAnchor, TrainConfig,
    replace_model,
)
from .rng import generator
from .similarity import is_usable, similarity_matrix


__all__ = (
    'OptimizerState',
    'StepRecord',
    'Trainer',
    'TrainerState',
    'TrainerStateError',
    'TrainSummary',

    'adam_step',
    'one_cycle_lr',
    'train',
)


logger = logging.getLogger(__name__)


StepCallback = Callable[[int, 'StepRecord'], None]


WARMUP_FRACTION = 0.3
INITIAL_DIV = 25.0
FINAL_DIV = 1e4


def one_cycle_lr(step: float, total_steps: float, lr_max: float) -> float:
    """
    Cosine one-cycle schedule: from ``lr_max / 25`` at step 0 up to
    ``lr_max`` at 30% of ``total_steps``, then down to ``lr_max / 1e4`` at
    ``total_steps``.
    """

    start, final = lr_max / INITIAL_DIV, lr_max / FINAL_DIV
    if total_steps <= 0:
        return start

    step = min(max(step, 0), total_steps)
    peak = WARMUP_FRACTION * total_steps

    if step <= peak:
        low, high, pct = start, lr_max, step / peak
    else:
        low, high, pct = lr_max, final, (step - peak) / (total_steps - peak)

    return high + (low - high) / 2.0 * (1.0 + cos(pi * pct))


@dataclass
class OptimizerState:
    """
    Adam moment estimates, one pair per parameter tensor.
    """

    first: Dict[str, np.ndarray]
    second: Dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


    @classmethod
    def zeros_like(
            cls,
            params: EncoderParams,
            beta1: float = 0.9,
            beta2: float = 0.999,
            eps: float = 1e-8) -> 'OptimizerState':

        return cls(
            first={name: np.zeros_like(arr) for name, arr in params.items()},
            second={name: np.zeros_like(arr) for name, arr in params.items()},
            beta1=beta1, beta2=beta2, eps=eps)


def adam_step(
        params: EncoderParams,
        grads: ParamGradients,
        state: OptimizerState,
        lr: float,
        weight_decay: float = 0.0) -> Tuple[EncoderParams, OptimizerState]:
    """
    One bias-corrected Adam update, with decoupled weight decay. Returns
    new params and a new state; neither input is modified.
    """

    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    correct1 = 1.0 - b1 ** step
    correct2 = 1.0 - b2 ** step

    first, second, updated = {}, {}, {}
    for name, value in params.items():
        g = grads[name]
        m = b1 * state.first[name] + (1.0 - b1) * g
        v = b2 * state.second[name] + (1.0 - b2) * g * g

        new = value - lr * (m / correct1) / (np.sqrt(v / correct2) + state.eps)
        if weight_decay:
            new = new - lr * weight_decay * value

        first[name], second[name], updated[name] = m, v, new

    new_state = OptimizerState(first, second, step, b1, b2, state.eps)
    return params.replace(updated), new_state


@dataclass
class StepRecord:
    step: int
    lr: float
    loss: Optional[float]
    triplet_count: int
    active: int = 0
    fallbacks: int = 0
    phase: Optional[str] = None
    skipped: bool = False
    error: Optional[TrajletError] = None


    def to_dict(self) -> Dict[str, Any]:
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        if self.error is not None:
            data['error'] = self.error.category
        return {key: value for key, value in data.items() if value is not None}


class TrainerStateError(Exception):
    pass


class TrainerState(Enum):
    """
    READY → EXHAUSTED once every configured step has run.

    Any state → BROKEN on error.
    """

    READY = "ready"
    EXHAUSTED = "exhausted"
    BROKEN = "broken"


@dataclass
class TrainSummary:
    steps_completed: int
    skipped_steps: int
    state: TrainerState
    checkpoint: Checkpoint
    records: List[StepRecord] = field(default_factory=list)


    def mean_loss(self, start: int, stop: int) -> float:
        losses = [r.loss for r in self.records[start:stop] if not r.skipped]
        return float(np.mean(losses)) if losses else float('nan')


class Trainer:
    """
    Trains an encoder on a pool of normalized trajectories, one batch per
    :meth:`step`.

    Trajectories that the configured metric cannot score (zero displacement
    for ``cosine``, an all-zero spectrum for ``fft``) are dropped from the
    pool up front. Batches that yield no triplet are skipped, logged, and
    still advance the schedule.
    """

    def __init__(
            self,
            pool: Sequence[NormalizedTrajectory],
            train_config: TrainConfig,
            encoder_config: EncoderConfig,
            out_dir: Union[str, Path, None] = None,
            log: Optional[TextIO] = None):

        overrides = {}
        if train_config.input_dropout_p is not None:
            overrides['input_dropout_p'] = train_config.input_dropout_p
        if train_config.attn_dropout_p is not None:
            overrides['attn_dropout_p'] = train_config.attn_dropout_p
        if overrides:
            encoder_config = replace_model(encoder_config, **overrides)

        self.train_config = train_config
        self.encoder_config = encoder_config
        self.metric = Metric(train_config.metric)
        self.out_dir = out_dir and Path(out_dir)
        self.log = log

        usable = [nt for nt in pool if is_usable(nt, self.metric)]
        excluded = len(pool) - len(usable)
        if excluded:
            logger.warning(
                f"Excluded {excluded} trajectories that {self.metric.value}"
                f" similarity cannot score")

        if len(usable) < train_config.batch_size:
            raise PoolTooSmall(
                f"{len(usable)} usable trajectories for a batch of"
                f" {train_config.batch_size}")

        self.pool: List[NormalizedTrajectory] = usable
        self.inputs = [encode_input(nt, encoder_config) for nt in usable]

        self.params = EncoderParams.initialize(encoder_config, train_config.seed)
        self.optimizer = OptimizerState.zeros_like(
            self.params, train_config.beta1, train_config.beta2,
            train_config.eps)

        self.steps_completed = 0
        self.skipped_steps = 0
        self.records: List[StepRecord] = []
        self.state = TrainerState.READY


    def phase(self, step: int) -> Optional[MiningPhase]:
        cfg = self.train_config
        if Mining(cfg.mining) != Mining.DYNAMIC:
            return None
        if step <= cfg.semi_hard_fraction * cfg.steps:
            return MiningPhase.SEMI_HARD
        return MiningPhase.HARD


    def sample_batch(self, step: int) -> np.ndarray:
        rng = generator(self.train_config.seed, 'batch', step)
        return rng.choice(len(self.pool), size=self.train_config.batch_size,
                          replace=False)


    def step(self) -> int:
        """
        Run one training step. Returns 1, or 0 once every step has run.

        :raises NonFiniteLoss: if the loss diverges; the trainer is BROKEN
        """

        if self.state == TrainerState.EXHAUSTED:
            return 0
        if self.state == TrainerState.BROKEN:
            raise TrainerStateError("Trainer is in the BROKEN state")

        try:
            record = self._train_step(self.steps_completed + 1)
        except Exception:
            self.state = TrainerState.BROKEN
            raise

        self.steps_completed = record.step
        self.records.append(record)

        if self.log is not None:
            self.log.write(yaml_line(record.to_dict()))

        cfg = self.train_config
        if record.step % cfg.log_every == 0 or record.step == cfg.steps:
            logger.info(f"step {record.step}/{cfg.steps} lr={record.lr:.3e}"
                        f" loss={record.loss} triplets={record.triplet_count}")

        if (cfg.checkpoint_every and self.out_dir and
                record.step % cfg.checkpoint_every == 0 and
                record.step < cfg.steps):
            save_checkpoint(self.checkpoint(), self.out_dir,
                            f"checkpoint-{record.step:06d}.trjl")

        if record.step >= cfg.steps:
            self.state = TrainerState.EXHAUSTED

        return 1


    def _train_step(self, step: int) -> StepRecord:
        cfg = self.train_config
        lr = one_cycle_lr(step - 1, cfg.steps - 1, cfg.lr_max)
        phase = self.phase(step)

        batch = self.sample_batch(step)
        sim = similarity_matrix([self.pool[i] for i in batch],
                                self.metric, cfg.alpha)
        inputs = [self.inputs[i] for i in batch]
        seeds = [int(s) for s in generator(cfg.seed, 'dropout', step).integers(
            0, 2 ** 63, size=len(batch))]
        mining_rng = generator(cfg.seed, 'mining', step)

        tape = None
        fallbacks = 0
        if phase is None:
            triplets = mine_random(sim, cfg.sim_threshold, mining_rng)
        else:
            raw, tape = forward_batch(self.params, inputs, seeds)
            units, norms = normalize_embeddings(raw)
            triplets, fallbacks = mine_dynamic(
                sim, units, cfg.sim_threshold, phase, cfg.margin, mining_rng)

        triplets = cap_triplets(triplets, cfg.triplet_cap, mining_rng)

        if not triplets:
            skip = NoTripletsInBatch(
                f"no triplets in a batch of {len(batch)} at similarity"
                f" threshold {cfg.sim_threshold}", index=step)
            self.skipped_steps += 1
            logger.warning(f"Skipping step {step}: {skip.category}: {skip.message}")
            return StepRecord(step=step, lr=lr, loss=None, triplet_count=0,
                              phase=phase and phase.value, skipped=True,
                              error=skip)

        if tape is None:
            raw, tape = forward_batch(self.params, inputs, seeds)
            units, norms = normalize_embeddings(raw)

        loss, dunits, active = batch_triplet_loss(units, triplets, cfg.margin)
        if not np.isfinite(loss):
            raise NonFiniteLoss(step, {
                'triplets': len(triplets),
                'max_norm': float(norms.max()),
                'min_norm': float(norms.min()),
            })

        grads = backward(tape, normalize_embeddings_backward(units, norms, dunits))
        self.params, self.optimizer = adam_step(
            self.params, grads, self.optimizer, lr, cfg.weight_decay)

        return StepRecord(step=step, lr=lr, loss=loss,
                          triplet_count=len(triplets), active=active,
                          fallbacks=fallbacks, phase=phase and phase.value)


    def run(self, step_callback: Optional[StepCallback] = None) -> TrainSummary:
        """
        Step until every configured step has run, then write the final
        checkpoint when an output directory was given.
        """

        for _ in iter(self.step, 0):
            if step_callback:
                step_callback(self.steps_completed, self.records[-1])

        ckpt = self.checkpoint()
        if self.out_dir:
            save_checkpoint(ckpt, self.out_dir)

        return TrainSummary(
            steps_completed=self.steps_completed,
            skipped_steps=self.skipped_steps,
            state=self.state,
            checkpoint=ckpt,
            records=self.records)


    def checkpoint(self) -> Checkpoint:
        cfg = self.train_config
        return Checkpoint(self.params, {
            'steps_completed': self.steps_completed,
            'skipped_steps': self.skipped_steps,
            'metric': self.metric.value,
            'alpha': cfg.alpha,
            'anchor': RotationAnchor(cfg.anchor).value,
            'pool_size': len(self.pool),
            'train': cfg.model_dump(),
        })


    def is_exhausted(self) -> bool:
        return self.state == TrainerState.EXHAUSTED


    def is_broken(self) -> bool:
        return self.state == TrainerState.BROKEN


def train(
        pool: Sequence[NormalizedTrajectory],
        train_config: TrainConfig,
        encoder_config: EncoderConfig,
        out_dir: Union[str, Path, None] = None,
        log: Optional[TextIO] = None) -> Checkpoint:
    """
    Build a :class:`Trainer`, run it to completion and return the final
    checkpoint.
    """

    trainer = Trainer(pool, train_config, encoder_config, out_dir, log)
    return trainer.run().checkpoint


# The end.
