"""
trajlet - test_retrieval

Unit tests for trajlet.retrieval: banks, exact search, and the IVF index.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import unittest
from io import BytesIO
from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np

from trajlet.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from trajlet.core import NormalizedTrajectory, Trajectory, denormalize, normalize
from trajlet.encoder import EncoderParams
from trajlet.exceptions import FormatError, TooFewVectors, UnknownId
from trajlet.models import EncoderConfig, RotationAnchor
from trajlet.retrieval import (
    BANK_FILE, EmbeddingBank, build_bank, build_ivf, checkpoint_anchor,
    embed_query, load_bank, read_bank, retrieve_trajectories, save_bank,
    search_exact, search_ivf, write_bank,
)


def unit_rows(rng, count, dim=4):
    rows = rng.normal(size=(count, dim))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def line(traj_id, slope=0.0, label=None):
    points = [(t, slope * t * t) for t in range(5)]
    return NormalizedTrajectory(points, source_id=traj_id, label=label)


def random_bank(count=50, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    ids = [f"t{i:03d}" for i in range(count)]
    return EmbeddingBank(ids, unit_rows(rng, count, dim),
                         [line(i, 0.01 * n) for n, i in enumerate(ids)])


def tiny_checkpoint(anchor='displacement'):
    cfg = EncoderConfig(num_heads=2, num_layers=1, d_model=8, d_emb=4, max_seq_len=8)
    return Checkpoint(EncoderParams.initialize(cfg, seed=2), {'anchor': anchor})


class TestEmbeddingBank(unittest.TestCase):

    def test_rows_read_only(self):
        bank = random_bank(5)
        with self.assertRaises(ValueError):
            bank.embeddings[0, 0] = 0.0


    def test_duplicate_id(self):
        rows = np.eye(2)
        with self.assertRaises(ValueError):
            EmbeddingBank(['a', 'a'], rows, [line('a'), line('a')])


    def test_misaligned(self):
        with self.assertRaises(ValueError):
            EmbeddingBank(['a', 'b'], np.eye(2), [line('a')])


    def test_not_unit(self):
        with self.assertRaises(ValueError):
            EmbeddingBank(['a'], np.array([[2.0, 0.0]]), [line('a')])


    def test_position(self):
        bank = random_bank(5)
        self.assertEqual(bank.position('t003'), 3)
        with self.assertRaises(UnknownId):
            bank.position('nope')


class TestSearchExact(unittest.TestCase):

    def test_matches_brute_force(self):
        bank = random_bank(60)
        rng = np.random.default_rng(9)
        for query in unit_rows(rng, 10):
            result = search_exact(bank, query, 6)
            dist = np.linalg.norm(bank.embeddings - query, axis=1)
            expected = np.argsort(dist, kind='stable')[:6]

            np.testing.assert_array_equal(result.indices, expected)
            self.assertEqual(result.ids, tuple(bank.ids[i] for i in expected))
            self.assertTrue(np.all(np.diff(result.distances) >= 0))


    def test_cosine_order(self):
        """
        On unit rows, ascending euclidean distance is descending cosine,
        ties broken by id.
        """

        rng = np.random.default_rng(23)
        for dim in (2, 4, 16):
            bank = random_bank(80, dim=dim, seed=dim)
            for query in unit_rows(rng, 10, dim):
                cosine = bank.embeddings @ query
                expected = np.lexsort((np.arange(len(bank)), -cosine))

                result = search_exact(bank, query, len(bank))
                np.testing.assert_array_equal(result.indices, expected)
                self.assertEqual(result.ids, tuple(bank.ids[i] for i in expected))


    def test_k_larger_than_bank(self):
        bank = random_bank(3)
        result = search_exact(bank, bank.embeddings[0], 6)
        self.assertEqual(len(result), 3)
        self.assertEqual(result.k, 6)


    def test_member_first(self):
        bank = random_bank(20)
        result = search_exact(bank, bank.embeddings[7], 1)
        self.assertEqual(result.ids, ('t007',))
        self.assertEqual(result.distances[0], 0.0)


    def test_ties_by_id(self):
        rows = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]])
        ids = ['d', 'c', 'a', 'b']
        bank = EmbeddingBank(ids, rows, [line(i) for i in ids])

        result = search_exact(bank, np.array([0.0, 1.0]), 2)
        self.assertEqual(result.ids, ('a', 'b'))


    def test_empty_bank(self):
        bank = EmbeddingBank([], np.zeros((0, 4)), [])
        self.assertEqual(len(search_exact(bank, np.ones(4) / 2, 3)), 0)


    def test_bad_k(self):
        with self.assertRaises(ValueError):
            search_exact(random_bank(3), np.array([1.0, 0, 0, 0]), 0)


class TestIvf(unittest.TestCase):

    def test_lists_partition(self):
        bank = random_bank(100)
        index = build_ivf(bank, 8, seed=3)

        members = np.sort(np.concatenate(index.lists))
        np.testing.assert_array_equal(members, np.arange(100))
        self.assertTrue(all(len(m) > 0 for m in index.lists))
        np.testing.assert_allclose(np.linalg.norm(index.centroids, axis=1), 1.0)


    def test_deterministic(self):
        bank = random_bank(80)
        a = build_ivf(bank, 5, seed=11)
        b = build_ivf(bank, 5, seed=11)

        np.testing.assert_array_equal(a.centroids, b.centroids)
        for la, lb in zip(a.lists, b.lists):
            np.testing.assert_array_equal(la, lb)


    def test_full_probe_is_exact(self):
        bank = random_bank(100)
        index = build_ivf(bank, 10, seed=0)
        rng = np.random.default_rng(13)

        for query in unit_rows(rng, 20):
            exact = search_exact(bank, query, 6)
            probed = search_ivf(index, bank, query, 6, nprobe=10)
            self.assertEqual(exact.ids, probed.ids)
            np.testing.assert_array_equal(exact.distances, probed.distances)


    def test_recall_grows_with_nprobe(self):
        bank = random_bank(200, dim=8, seed=17)
        index = build_ivf(bank, 16, seed=1)
        queries = unit_rows(np.random.default_rng(19), 30, 8)

        recalls = []
        for nprobe in (1, 4, 16):
            hits = 0
            for query in queries:
                exact = set(search_exact(bank, query, 6).ids)
                hits += len(exact & set(search_ivf(index, bank, query, 6, nprobe).ids))
            recalls.append(hits / (6 * len(queries)))

        self.assertLessEqual(recalls[0], recalls[1])
        self.assertLessEqual(recalls[1], recalls[2])
        self.assertEqual(recalls[2], 1.0)


    def test_too_few_vectors(self):
        with self.assertRaises(TooFewVectors):
            build_ivf(random_bank(3), 4)


    def test_bad_nprobe(self):
        bank = random_bank(20)
        index = build_ivf(bank, 4)
        for nprobe in (0, 5):
            with self.assertRaises(ValueError):
                search_ivf(index, bank, bank.embeddings[0], 3, nprobe)


    def test_duplicate_rows_fill_lists(self):
        rows = np.tile(np.array([[1.0, 0.0]]), (6, 1))
        ids = [f"d{i}" for i in range(6)]
        bank = EmbeddingBank(ids, rows, [line(i) for i in ids])

        index = build_ivf(bank, 3, seed=0)
        self.assertEqual(sum(len(m) for m in index.lists), 6)


class TestBankWithCheckpoint(unittest.TestCase):

    def test_anchor_from_checkpoint(self):
        self.assertEqual(checkpoint_anchor(tiny_checkpoint('heading')),
                         RotationAnchor.HEADING)
        self.assertEqual(checkpoint_anchor(Checkpoint(tiny_checkpoint().params, {})),
                         RotationAnchor.DISPLACEMENT)


    def test_query_finds_member(self):
        ckpt = tiny_checkpoint()
        raws = [Trajectory(f"r{i}", [(0, 0), (1, 0.1 * i), (2, 0.3 * i), (3, i)])
                for i in range(1, 8)]
        bank = build_bank(raws, ckpt)

        self.assertEqual(bank.ids, tuple(r.id for r in raws))
        self.assertEqual(bank.metadata['anchor'], 'displacement')

        query = embed_query(ckpt, normalize(raws[4]))
        result = search_exact(bank, query, 1)
        self.assertEqual(result.ids, ('r5',))
        self.assertEqual(result.distances[0], 0.0)


    def test_retrieve_trajectories(self):
        bank = random_bank(10)
        result = search_exact(bank, bank.embeddings[2], 3)
        found = retrieve_trajectories(bank, result)

        self.assertEqual([nt.source_id for nt in found], list(result.ids))


class TestBankFiles(unittest.TestCase):

    def test_round_trip(self):
        bank = random_bank(12)
        buffer = BytesIO()
        write_bank(bank, buffer)

        back = read_bank(BytesIO(buffer.getvalue()), bank.trajectories)
        self.assertEqual(back.ids, bank.ids)
        np.testing.assert_array_equal(back.embeddings, bank.embeddings)


    def test_bad_magic(self):
        with self.assertRaises(FormatError):
            read_bank(BytesIO(b'NOPE' + b'\0' * 40), [])


    def test_truncated_rows(self):
        bank = random_bank(4)
        buffer = BytesIO()
        write_bank(bank, buffer)

        with self.assertRaises(FormatError):
            read_bank(BytesIO(buffer.getvalue()[:-1]), bank.trajectories)


    def test_mismatched_trajectories(self):
        bank = random_bank(4)
        buffer = BytesIO()
        write_bank(bank, buffer)

        with self.assertRaises(FormatError):
            read_bank(BytesIO(buffer.getvalue()), bank.trajectories[:3])


    def test_save_and_load(self):
        bank = random_bank(7)
        with TemporaryDirectory() as tmp:
            path = save_bank(bank, Path(tmp) / 'bank')
            self.assertEqual(path.name, BANK_FILE)

            for source in (path, path.parent):
                back = load_bank(source)
                self.assertEqual(back.ids, bank.ids)
                np.testing.assert_array_equal(back.embeddings, bank.embeddings)
                np.testing.assert_allclose(back.trajectories[3].points,
                                           bank.trajectories[3].points)


    def test_rebuild_is_byte_identical(self):
        raws = [Trajectory(f"r{i}", [(i, 0), (i + 1, 0.1 * i), (i + 2, 0.3 * i), (i + 3, i)])
                for i in range(1, 9)]
        with TemporaryDirectory() as tmp:
            tmp = Path(tmp)
            save_checkpoint(tiny_checkpoint(), tmp / 'model')

            for name in ('first', 'second'):
                save_bank(build_bank(raws, load_checkpoint(tmp / 'model')), tmp / name)

            for filename in (BANK_FILE, 'bank.trj', 'bank.yml'):
                self.assertEqual((tmp / 'first' / filename).read_bytes(),
                                 (tmp / 'second' / filename).read_bytes())


    def test_load_keeps_transforms(self):
        raws = [Trajectory(f"r{i}", [(5, -2), (5 + i, -1), (6 + i, 1), (8, 2 * i)], label='x')
                for i in range(1, 6)]
        bank = build_bank(raws, tiny_checkpoint())

        with TemporaryDirectory() as tmp:
            back = load_bank(save_bank(bank, Path(tmp) / 'bank'))

        for raw, saved, loaded in zip(raws, bank.trajectories, back.trajectories):
            self.assertEqual(loaded.transform, saved.transform)
            np.testing.assert_allclose(denormalize(loaded).points, raw.points, atol=1e-9)


    def test_load_without_transforms(self):
        bank = random_bank(4)
        with TemporaryDirectory() as tmp:
            path = save_bank(bank, Path(tmp) / 'bank')
            (path.parent / 'bank.yml').unlink()
            back = load_bank(path)

        np.testing.assert_array_equal(denormalize(back.trajectories[2]).points,
                                      back.trajectories[2].points)


# The end.
