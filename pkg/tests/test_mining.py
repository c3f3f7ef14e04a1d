"""
trajlet - test_mining

Unit tests for trajlet.mining: random and dynamic triplet mining, and the
triplet margin loss.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import unittest

import numpy as np

from trajlet.mining import (
    Triplet, batch_triplet_loss, cap_triplets, mine_dynamic, mine_random,
    triplet_loss, verify_triplets,
)
from trajlet.models import Metric, MiningPhase
from trajlet.similarity import SimilarityMatrix


HAND_SIM = np.array([
    [1.0, 0.9, 0.1],
    [0.9, 1.0, 0.2],
    [0.1, 0.2, 1.0],
])


FOUR_SIM = np.array([
    [1.0, 0.9, 0.1, 0.1],
    [0.9, 1.0, 0.2, 0.2],
    [0.1, 0.2, 1.0, 0.1],
    [0.1, 0.2, 0.1, 1.0],
])


def random_unit(rng, size=4):
    v = rng.normal(size=size)
    return v / np.linalg.norm(v)


class TestMineRandom(unittest.TestCase):

    def test_all_identical(self):
        sim = SimilarityMatrix(np.ones((5, 5)), Metric.COSINE)
        self.assertEqual(mine_random(sim, 0.7, np.random.default_rng(0)), [])


    def test_by_hand(self):
        sim = SimilarityMatrix(HAND_SIM, Metric.COSINE)
        triplets = mine_random(sim, 0.7, np.random.default_rng(0))
        self.assertEqual(sorted(triplets), [(0, 1, 2), (1, 0, 2)])


    def test_negatives_uniform(self):
        # anchor 0 has 1000 positives and three negatives; every other row
        # has no negative at all
        size = 1004
        values = np.ones((size, size))
        values[0, 1:1001] = 0.9
        values[0, 1001:] = 0.1

        rng = np.random.default_rng(1234)
        counts = np.zeros(3)
        for _ in range(100):
            for _, _, n in mine_random(values, 0.7, rng):
                counts[n - 1001] += 1

        self.assertEqual(counts.sum(), 100000)
        expected = counts.sum() / 3
        chi2 = ((counts - expected) ** 2 / expected).sum()
        self.assertLess(chi2, 13.8)


    def test_verified(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            raw = rng.uniform(0, 1, size=(12, 12))
            values = (raw + raw.T) / 2
            np.fill_diagonal(values, 1.0)
            triplets = mine_random(values, 0.7, rng)
            self.assertTrue(verify_triplets(values, 0.7, triplets))


    def test_verify_rejects(self):
        self.assertFalse(verify_triplets(HAND_SIM, 0.7, [Triplet(0, 2, 1)]))
        self.assertFalse(verify_triplets(HAND_SIM, 0.7, [Triplet(0, 0, 2)]))


class TestMineDynamic(unittest.TestCase):

    def test_equidistant_falls_back(self):
        embeddings = np.eye(3)
        triplets, fallbacks = mine_dynamic(
            HAND_SIM, embeddings, 0.7, MiningPhase.HARD, 0.5,
            np.random.default_rng(0))

        self.assertEqual(len(triplets), 2)
        self.assertEqual(fallbacks, len(triplets))


    def test_hard_picks_in_band(self):
        embeddings = np.array([(0.0, 0.0), (0.5, 0.0), (0.0, 0.3), (0.0, 0.8)])
        triplets, _ = mine_dynamic(
            FOUR_SIM, embeddings, 0.7, MiningPhase.HARD, 0.5,
            np.random.default_rng(0))

        self.assertIn(Triplet(0, 1, 2), triplets)


    def test_semi_hard_picks_in_band(self):
        embeddings = np.array([(0.0, 0.0), (0.5, 0.0), (0.0, 0.3), (0.0, 0.8)])
        triplets, _ = mine_dynamic(
            FOUR_SIM, embeddings, 0.7, MiningPhase.SEMI_HARD, 0.5,
            np.random.default_rng(0))

        self.assertIn(Triplet(0, 1, 3), triplets)


    def test_semi_hard_bounds_strict(self):
        # from anchor 0 the negatives sit exactly on d(a, p) and exactly on
        # d(a, p) + margin, so neither is in band
        embeddings = np.array([(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.0, 1.0)])
        triplets, fallbacks = mine_dynamic(
            FOUR_SIM, embeddings, 0.7, MiningPhase.SEMI_HARD, 0.5,
            np.random.default_rng(0))

        self.assertEqual(len(triplets), 2)
        self.assertEqual(fallbacks, 1)


class TestTripletLoss(unittest.TestCase):

    def test_inactive(self):
        e_a = np.array([0.0, 0.0])
        loss, ga, gp, gn = triplet_loss(e_a, np.array([0.2, 0.0]), np.array([0.0, 0.9]), 0.5)

        self.assertEqual(loss, 0.0)
        for grad in (ga, gp, gn):
            np.testing.assert_array_equal(grad, 0.0)


    def test_active(self):
        e_a = np.array([1.0, 0.0])
        loss, _, _, _ = triplet_loss(e_a, np.array([1.0, 0.8]), np.array([1.0, 0.3]), 0.5)
        self.assertAlmostEqual(loss, 1.0, places=12)


    def test_finite_differences(self):
        rng = np.random.default_rng(97)
        checked = 0
        while checked < 20:
            e = [random_unit(rng) for _ in range(3)]
            loss, *grads = triplet_loss(*e, 1.0)
            if loss <= 1e-3:
                continue

            eps = 1e-6
            for which in range(3):
                numeric = np.zeros(4)
                for j in range(4):
                    plus = [v.copy() for v in e]
                    minus = [v.copy() for v in e]
                    plus[which][j] += eps
                    minus[which][j] -= eps
                    numeric[j] = (triplet_loss(*plus, 1.0)[0] -
                                  triplet_loss(*minus, 1.0)[0]) / (2 * eps)

                scale = max(np.abs(numeric).max(), np.abs(grads[which]).max(), 1e-6)
                self.assertLess(np.abs(numeric - grads[which]).max() / scale, 1e-6)
            checked += 1


    def test_rotation_invariant(self):
        rng = np.random.default_rng(101)
        q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        for _ in range(20):
            e = [random_unit(rng) for _ in range(3)]
            self.assertAlmostEqual(triplet_loss(*e, 0.5)[0],
                                   triplet_loss(*(q @ v for v in e), 0.5)[0],
                                   places=12)


class TestBatchTripletLoss(unittest.TestCase):

    def test_matches_single(self):
        rng = np.random.default_rng(103)
        units = np.stack([random_unit(rng) for _ in range(6)])
        triplets = [Triplet(0, 1, 2), Triplet(1, 0, 3), Triplet(4, 5, 0), Triplet(2, 3, 4)]

        loss, grads, active = batch_triplet_loss(units, triplets, 0.8)

        expected_grads = np.zeros_like(units)
        total, count = 0.0, 0
        for t in triplets:
            value, ga, gp, gn = triplet_loss(units[t.anchor], units[t.positive],
                                             units[t.negative], 0.8)
            total += value
            count += value > 0
            expected_grads[t.anchor] += ga / len(triplets)
            expected_grads[t.positive] += gp / len(triplets)
            expected_grads[t.negative] += gn / len(triplets)

        self.assertAlmostEqual(loss, total / len(triplets), places=12)
        self.assertEqual(active, count)
        np.testing.assert_allclose(grads, expected_grads, atol=1e-12)


    def test_empty(self):
        loss, grads, active = batch_triplet_loss(np.eye(3), [], 0.5)
        self.assertEqual((loss, active), (0.0, 0))
        np.testing.assert_array_equal(grads, 0.0)


    def test_zero_margin_separable(self):
        units = np.array([[1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])
        loss, grads, active = batch_triplet_loss(units, [Triplet(0, 1, 2)], 0.0)
        self.assertEqual(loss, 0.0)
        self.assertEqual(active, 0)


class TestCapTriplets(unittest.TestCase):

    def test_under_cap(self):
        triplets = [Triplet(0, 1, 2), Triplet(1, 0, 2)]
        self.assertEqual(cap_triplets(triplets, 5, np.random.default_rng(0)), triplets)


    def test_over_cap(self):
        triplets = [Triplet(i, i + 1, i + 2) for i in range(50)]
        kept = cap_triplets(triplets, 10, np.random.default_rng(0))

        self.assertEqual(len(kept), 10)
        self.assertEqual(kept, sorted(kept))
        self.assertTrue(set(kept) <= set(triplets))


# The end.
