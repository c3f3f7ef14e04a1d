"""
trajlet - test_training

Unit tests for trajlet.training: the one-cycle schedule, the optimizer
step, and the Trainer loop.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import unittest
from io import BytesIO, StringIO
from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np
from yaml import safe_load

from trajlet.checkpoint import Checkpoint, write_checkpoint
from trajlet.core import normalize
from trajlet.encoder import EncoderParams
from trajlet.exceptions import NoTripletsInBatch, PoolTooSmall
from trajlet.loader import yaml_line
from trajlet.models import EncoderConfig, MiningPhase, TrainConfig
from trajlet.training import (
    OptimizerState, StepRecord, Trainer, TrainerState, TrainerStateError,
    adam_step, one_cycle_lr, train,
)


def two_class_pool(count=20, length=6, seed=0):
    """
    Straight east-going lines and arcs bulging north, all with a +x
    displacement. Within a class the cosine score stays above 0.7 and
    across classes it falls below.
    """

    rng = np.random.default_rng(seed)
    t = np.arange(length, dtype=np.float64)
    pool = []
    for i in range(count):
        speed = rng.uniform(1.0, 1.1)
        pool.append(normalize(np.stack((t * speed, np.zeros(length)), axis=1)))

        bulge = rng.uniform(0.45, 0.55)
        arc = np.stack((t * speed, bulge * t * (length - 1 - t)), axis=1)
        pool.append(normalize(arc))
    return pool


def tiny_encoder():
    return EncoderConfig(num_heads=2, num_layers=1, d_model=16, d_emb=4,
                         max_seq_len=8, input_dropout_p=0.0, attn_dropout_p=0.0)


def tiny_train(**changes):
    values = dict(batch_size=16, steps=20, seed=7, margin=0.5, lr_max=1e-2,
                  log_every=5)
    values.update(changes)
    return TrainConfig(**values)


def checkpoint_bytes(ckpt):
    buffer = BytesIO()
    write_checkpoint(ckpt, buffer)
    return buffer.getvalue()


class TestOneCycle(unittest.TestCase):

    def test_anchors(self):
        self.assertAlmostEqual(one_cycle_lr(0, 100, 1.0), 1.0 / 25, places=15)
        self.assertAlmostEqual(one_cycle_lr(30, 100, 1.0), 1.0, places=15)
        self.assertAlmostEqual(one_cycle_lr(100, 100, 1.0), 1e-4, places=15)


    def test_shape(self):
        grid = [one_cycle_lr(s / 10, 1000, 0.5) for s in range(10001)]
        peak = int(np.argmax(grid))

        self.assertTrue(all(a <= b for a, b in zip(grid[:peak], grid[1:peak + 1])))
        self.assertTrue(all(a >= b for a, b in zip(grid[peak:], grid[peak + 1:])))
        self.assertEqual(peak, 3000)


    def test_no_steps(self):
        self.assertEqual(one_cycle_lr(0, 0, 1.0), 1.0 / 25)


class TestAdam(unittest.TestCase):

    def setUp(self):
        self.params = EncoderParams.initialize(tiny_encoder(), seed=1)
        self.state = OptimizerState.zeros_like(self.params)


    def test_zero_gradients(self):
        grads = {name: np.zeros_like(arr) for name, arr in self.params.items()}
        updated, state = adam_step(self.params, grads, self.state, 0.1)

        self.assertEqual(state.step, 1)
        self.assertEqual(self.state.step, 0)
        for name in self.params:
            np.testing.assert_array_equal(updated[name], self.params[name])


    def test_first_step_size(self):
        # the first bias-corrected step moves every element by about lr
        grads = {name: np.ones_like(arr) for name, arr in self.params.items()}
        updated, _ = adam_step(self.params, grads, self.state, 0.01)

        for name in self.params:
            np.testing.assert_allclose(self.params[name] - updated[name], 0.01, rtol=1e-6)


    def test_weight_decay(self):
        grads = {name: np.zeros_like(arr) for name, arr in self.params.items()}
        updated, _ = adam_step(self.params, grads, self.state, 0.1, weight_decay=0.5)

        np.testing.assert_allclose(updated["input.weight"],
                                   self.params["input.weight"] * 0.95)


class TestStepRecord(unittest.TestCase):

    def test_to_dict_drops_none(self):
        record = StepRecord(step=3, lr=0.1, loss=None, triplet_count=0, skipped=True)
        data = record.to_dict()

        self.assertNotIn('loss', data)
        self.assertNotIn('phase', data)
        self.assertEqual(data['step'], 3)
        self.assertTrue(data['skipped'])
        self.assertNotIn('error', data)


    def test_to_dict_error_category(self):
        skip = NoTripletsInBatch("no triplets", index=4)
        record = StepRecord(step=4, lr=0.1, loss=None, triplet_count=0,
                            skipped=True, error=skip)
        self.assertEqual(record.to_dict()['error'], 'no-triplets')

        line = yaml_line(record.to_dict())
        self.assertEqual(safe_load(line)['error'], 'no-triplets')


class TestTrainer(unittest.TestCase):

    def test_pool_too_small(self):
        with self.assertRaises(PoolTooSmall):
            Trainer(two_class_pool(count=4), tiny_train(), tiny_encoder())


    def test_excludes_degenerate(self):
        pool = two_class_pool(count=8)
        pool.append(normalize([(0, 0), (1, 1), (0, 0), (0, 0), (0, 0), (0, 0)]))

        with self.assertLogs('trajlet.training', level='WARNING') as logs:
            trainer = Trainer(pool, tiny_train(), tiny_encoder())

        self.assertEqual(len(trainer.pool), 16)
        self.assertIn("Excluded 1", logs.output[0])


    def test_dropout_overrides(self):
        trainer = Trainer(two_class_pool(count=8), tiny_train(input_dropout_p=0.25),
                          tiny_encoder())
        self.assertEqual(trainer.encoder_config.input_dropout_p, 0.25)
        self.assertEqual(trainer.encoder_config.attn_dropout_p, 0.0)


    def test_run(self):
        log = StringIO()
        trainer = Trainer(two_class_pool(count=10), tiny_train(), tiny_encoder(), log=log)

        calls = []
        summary = trainer.run(lambda step, record: calls.append(step))

        self.assertEqual(summary.steps_completed, 20)
        self.assertEqual(summary.state, TrainerState.EXHAUSTED)
        self.assertEqual(calls, list(range(1, 21)))
        self.assertIsInstance(summary.checkpoint, Checkpoint)

        lines = log.getvalue().splitlines()
        self.assertEqual(len(lines), 20)
        first = safe_load(lines[0])
        self.assertEqual(first['step'], 1)
        self.assertIn('triplet_count', first)
        self.assertAlmostEqual(first['lr'], 1e-2 / 25)

        self.assertEqual(trainer.step(), 0)


    def test_broken(self):
        trainer = Trainer(two_class_pool(count=10), tiny_train(), tiny_encoder())
        trainer.state = TrainerState.BROKEN
        with self.assertRaises(TrainerStateError):
            trainer.step()


    def test_deterministic(self):
        pool = two_class_pool(count=10)
        a = train(pool, tiny_train(steps=8), tiny_encoder())
        b = train(pool, tiny_train(steps=8), tiny_encoder())
        c = train(pool, tiny_train(steps=8, seed=8), tiny_encoder())

        self.assertEqual(checkpoint_bytes(a), checkpoint_bytes(b))
        self.assertNotEqual(checkpoint_bytes(a), checkpoint_bytes(c))


    def test_deterministic_with_dropout(self):
        pool = two_class_pool(count=10)
        cfg = tiny_train(steps=5, input_dropout_p=0.2, attn_dropout_p=0.1)
        self.assertEqual(checkpoint_bytes(train(pool, cfg, tiny_encoder())),
                         checkpoint_bytes(train(pool, cfg, tiny_encoder())))


    def test_skips_without_triplets(self):
        line = normalize([(0, 0), (1, 0), (2, 0), (3, 0)])
        pool = [line] * 20

        with self.assertLogs('trajlet.training', level='WARNING'):
            summary = Trainer(pool, tiny_train(steps=3), tiny_encoder()).run()

        self.assertEqual(summary.skipped_steps, 3)
        self.assertTrue(all(r.skipped for r in summary.records))
        for step, record in enumerate(summary.records, 1):
            self.assertIsInstance(record.error, NoTripletsInBatch)
            self.assertEqual(record.error.index, step)
        self.assertEqual(summary.checkpoint.get('skipped_steps'), 3)


    def test_loss_decreases(self):
        pool = two_class_pool(count=20)
        summary = Trainer(pool, tiny_train(steps=200), tiny_encoder()).run()

        self.assertLess(summary.mean_loss(180, 200), summary.mean_loss(0, 20))


    def test_zero_margin_reaches_zero(self):
        pool = two_class_pool(count=20)
        summary = Trainer(pool, tiny_train(steps=150, margin=0.0), tiny_encoder()).run()

        losses = [r.loss for r in summary.records if not r.skipped]
        self.assertEqual(min(losses), 0.0)


    def test_dynamic_phases(self):
        cfg = tiny_train(steps=10, mining='dynamic', semi_hard_fraction=0.5)
        trainer = Trainer(two_class_pool(count=10), cfg, tiny_encoder())

        self.assertEqual(trainer.phase(5), MiningPhase.SEMI_HARD)
        self.assertEqual(trainer.phase(6), MiningPhase.HARD)

        summary = trainer.run()
        phases = [r.phase for r in summary.records if not r.skipped]
        self.assertIn('semi-hard', phases)
        self.assertIn('hard', phases)


    def test_random_mining_has_no_phase(self):
        trainer = Trainer(two_class_pool(count=10), tiny_train(), tiny_encoder())
        self.assertIsNone(trainer.phase(1))


    def test_batches(self):
        trainer = Trainer(two_class_pool(count=10), tiny_train(), tiny_encoder())
        batch = trainer.sample_batch(3)

        self.assertEqual(len(set(batch.tolist())), 16)
        np.testing.assert_array_equal(batch, trainer.sample_batch(3))


    def test_checkpoints_written(self):
        with TemporaryDirectory() as tmp:
            cfg = tiny_train(steps=6, checkpoint_every=2)
            ckpt = train(two_class_pool(count=10), cfg, tiny_encoder(), out_dir=tmp)

            names = sorted(p.name for p in Path(tmp).glob('*.trjl'))
            self.assertEqual(names, ['checkpoint-000002.trjl',
                                     'checkpoint-000004.trjl',
                                     'checkpoint.trjl'])
            self.assertEqual(ckpt.get('steps_completed'), 6)
            self.assertEqual(ckpt.get('metric'), 'cosine')
            self.assertEqual(ckpt.get('anchor'), 'displacement')


# The end.
