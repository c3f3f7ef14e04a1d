"""
trajlet - test_workflow

Unit tests for trajlet.workflow: the holdout split, the pauseable
train/embed/evaluate workflow, and the sweep.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import csv
import json
import unittest
from pathlib import Path
from tempfile import TemporaryDirectory

from yaml import safe_load

from trajlet.evaluation import EmbeddingEngine, evaluate_engine
from trajlet.exceptions import PoolTooSmall
from trajlet.loader import load_trajectories
from trajlet.models import EncoderConfig, Metric, SweepSpec, TrainConfig
from trajlet.retrieval import build_bank, normalize_all
from trajlet.training import train
from trajlet.workflow import (
    SWEEP_COLUMNS, SweepRow, TrainEvalWorkflow, WorkflowState,
    WorkflowStateError, holdout_split, run_sweep,
)


TRJ = Path(__file__).parent / 'data' / 'trj'


def tiny_encoder(**changes):
    values = dict(num_heads=2, num_layers=1, d_model=8, d_emb=4, max_seq_len=8)
    values.update(changes)
    return EncoderConfig(**values)


def tiny_train(**changes):
    values = dict(batch_size=4, steps=3, seed=2, log_every=1)
    values.update(changes)
    return TrainConfig(**values)


class PausingWorkflow(TrainEvalWorkflow):
    """
    Pauses after every state it is told to.
    """

    def __init__(self, *args, pause_on=(), **kwargs):
        super().__init__(*args, **kwargs)
        self.pause_on = set(pause_on)
        self.visited = []
        self.paused = 0


    def workflow_state_change(self, from_state, to_state):
        self.visited.append(to_state)
        return to_state in self.pause_on


    def workflow_paused(self):
        self.paused += 1


class TestHoldoutSplit(unittest.TestCase):

    def test_split(self):
        items = list(range(20))
        bank, queries = holdout_split(items, 0.25, seed=4)

        self.assertEqual(len(queries), 5)
        self.assertEqual(sorted(bank + queries), items)
        self.assertEqual(bank, sorted(bank))
        self.assertEqual((bank, queries), holdout_split(items, 0.25, seed=4))
        self.assertNotEqual(queries, holdout_split(items, 0.25, seed=5)[1])


    def test_bounds(self):
        self.assertEqual(len(holdout_split([1, 2, 3], 0.01, 0)[1]), 1)
        self.assertEqual(len(holdout_split([1, 2, 3], 0.99, 0)[0]), 1)
        with self.assertRaises(ValueError):
            holdout_split([1], 0.5, 0)


class TestTrainEvalWorkflow(unittest.TestCase):

    def test_run(self):
        with TemporaryDirectory() as tmp:
            workflow = TrainEvalWorkflow(
                train_config=tiny_train(),
                encoder_config=tiny_encoder(),
                data=[TRJ / 'small.trj'],
                queries=[TRJ / 'queries.trj'],
                k=2,
                out_dir=tmp)

            self.assertEqual(workflow.run(), WorkflowState.COMPLETED)
            self.assertEqual(len(workflow.pool), 8)
            self.assertEqual(len(workflow.bank), 8)
            self.assertEqual(workflow.report.query_count, 2)
            self.assertEqual(workflow.summary.steps_completed, 3)

            out = Path(tmp)
            self.assertTrue((out / 'checkpoint.trjl').is_file())
            self.assertTrue((out / 'bank' / 'bank.trjb').is_file())

            report = json.loads((out / 'report.json').read_text())
            self.assertEqual(report['k'], 2)

            lines = (out / 'train.log').read_text().splitlines()
            self.assertEqual([safe_load(line)['step'] for line in lines], [1, 2, 3])


    def test_holdout(self):
        trajs = load_trajectories(TRJ / 'small.trj')
        workflow = TrainEvalWorkflow(
            train_config=tiny_train(), encoder_config=tiny_encoder(),
            trajectories=trajs, holdout=0.25, k=2)

        workflow.run()
        self.assertEqual(len(workflow.query_set), 2)
        self.assertEqual(len(workflow.bank), 6)
        held = {nt.source_id for nt in workflow.query_set}
        self.assertFalse(held & set(workflow.bank.ids))


    def test_ivf(self):
        trajs = load_trajectories(TRJ / 'small.trj')
        queries = load_trajectories(TRJ / 'queries.trj')
        workflow = TrainEvalWorkflow(
            train_config=tiny_train(), encoder_config=tiny_encoder(),
            trajectories=trajs, query_trajectories=queries,
            k=2, nlist=2, nprobe=2)

        workflow.run()
        self.assertEqual(workflow.report.engine, 'ivf-2-2')


    def test_pause_and_resume(self):
        trajs = load_trajectories(TRJ / 'small.trj')
        workflow = PausingWorkflow(
            train_config=tiny_train(), encoder_config=tiny_encoder(),
            trajectories=trajs, holdout=0.25, k=2,
            pause_on=(WorkflowState.LOADED, WorkflowState.EMBEDDED))

        self.assertEqual(workflow.run(), WorkflowState.LOADED)
        self.assertIsNone(workflow.checkpoint)

        self.assertEqual(workflow.resume(), WorkflowState.EMBEDDED)
        self.assertIsNone(workflow.report)

        self.assertEqual(workflow.resume(), WorkflowState.COMPLETED)
        self.assertEqual(workflow.paused, 2)
        self.assertEqual(workflow.visited, [
            WorkflowState.STARTING, WorkflowState.LOADING, WorkflowState.LOADED,
            WorkflowState.TRAINING, WorkflowState.TRAINED,
            WorkflowState.EMBEDDING, WorkflowState.EMBEDDED,
            WorkflowState.EVALUATING, WorkflowState.EVALUATED,
            WorkflowState.COMPLETED,
        ])

        with self.assertRaises(WorkflowStateError):
            workflow.resume()
        with self.assertRaises(WorkflowStateError):
            workflow.run()


    def test_failure(self):
        trajs = load_trajectories(TRJ / 'small.trj')
        workflow = TrainEvalWorkflow(
            train_config=tiny_train(batch_size=50), encoder_config=tiny_encoder(),
            trajectories=trajs, holdout=0.25)

        with self.assertRaises(PoolTooSmall):
            workflow.run()
        self.assertEqual(workflow.state, WorkflowState.FAILED)

        with self.assertRaises(WorkflowStateError):
            workflow.resume()


class TestSweep(unittest.TestCase):

    def test_row_values(self):
        row = SweepRow(('fft', 2, 1, 4, 0.0, 0.1), status='too-few-vectors')
        self.assertEqual(row.values(),
                         ['fft', '2', '1', '4', '0.0', '0.1', '', '', '', '', '',
                          'too-few-vectors'])


    def test_run_sweep(self):
        with TemporaryDirectory() as tmp:
            spec = SweepSpec(
                architectures=[(2, 1), (3, 1)],
                d_embs=[4],
                metrics=['cosine', 'fft'],
                encoder=tiny_encoder(),
                train=tiny_train(),
                data=str(TRJ / 'small.trj'),
                queries=str(TRJ / 'queries.trj'),
                k=2,
                out=str(Path(tmp) / 'sweep'))

            seen = []
            rows = run_sweep(spec, point_callback=seen.append)

            self.assertEqual(len(rows), 4)
            self.assertEqual(seen, rows)
            self.assertEqual([r.status for r in rows],
                             ['ok', 'config-error', 'ok', 'config-error'])

            with open(Path(tmp) / 'sweep' / 'sweep.csv', newline='') as fd:
                table = list(csv.reader(fd))

            self.assertEqual(tuple(table[0]), SWEEP_COLUMNS)
            self.assertEqual(len(table), 5)
            self.assertEqual(table[1][:4], ['cosine', '2', '1', '4'])
            self.assertNotEqual(table[1][6], '')
            self.assertEqual(table[2][6:11], [''] * 5)

            self.assertTrue((Path(tmp) / 'sweep' / 'cosine-2H1L-e4-ip0.3-ap0.2'
                             / 'report.json').is_file())


    def test_single_point_matches_train_then_eval(self):
        """
        A 1x1 sweep row carries the numbers of training and evaluating the
        same configuration by hand, holdout split included.
        """

        encoder = tiny_encoder(input_dropout_p=0.0, attn_dropout_p=0.0)
        train_config = tiny_train(steps=4, metric='fft')

        with TemporaryDirectory() as tmp:
            spec = SweepSpec(
                architectures=[(2, 1)],
                d_embs=[4],
                metrics=['fft'],
                encoder=encoder,
                train=train_config,
                data=str(TRJ / 'small.trj'),
                holdout=0.25,
                k=2,
                out=str(Path(tmp) / 'sweep'))

            rows = run_sweep(spec)
            with open(Path(tmp) / 'sweep' / 'sweep.csv', newline='') as fd:
                table = list(csv.reader(fd))

        data, queries = holdout_split(load_trajectories(TRJ / 'small.trj'), 0.25, seed=2)
        pool = normalize_all(data)
        ckpt = train(pool, train_config, encoder)
        report = evaluate_engine(EmbeddingEngine(build_bank(pool, ckpt), ckpt),
                                 normalize_all(queries), 2)

        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0].status, 'ok')
        self.assertEqual(rows[0].report.to_json(), report.to_json())

        self.assertEqual(len(table), 2)
        expected = SweepRow((Metric.FFT, 2, 1, 4, 0.0, 0.0), report).values()
        self.assertEqual(table[1], expected)
        self.assertEqual(float(table[1][SWEEP_COLUMNS.index('min_ade')]), report.min_ade)


# The end.
