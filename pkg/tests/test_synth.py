"""
trajlet - test_synth

Unit tests for trajlet.synth, the synthetic maneuver generator.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import unittest
from math import inf, pi
from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np

from trajlet.exceptions import ConfigError
from trajlet.models import DatasetSpec, ManeuverFamily, ManeuverSpec
from trajlet.synth import (
    generate, generate_maneuver, integrate_path, load_dataset_spec,
    maneuver_segments,
)


DATA = Path(__file__).parent / 'data' / 'config'


def clean_spec(family, **extra):
    """
    A noiseless spec with one meter per step and a long straight exit.
    """

    values = dict(family=family, count=3, speed=[10.0, 10.0],
                  curvature=[0.2, 0.2], noise_sigma=0.0, T=40, dt=0.1, seed=1)
    values.update(extra)
    return ManeuverSpec(**values)


def final_direction(traj):
    step = traj.points[-1] - traj.points[-2]
    return step / np.linalg.norm(step)


class TestSegments(unittest.TestCase):

    def test_straight(self):
        self.assertEqual(maneuver_segments(ManeuverFamily.STRAIGHT, 5, 0.1, pi / 2, 3.5),
                         [(inf, 0.0)])


    def test_turn_signs(self):
        left = maneuver_segments(ManeuverFamily.LEFT_TURN, 5.0, 0.1, pi / 2, 3.5)
        right = maneuver_segments(ManeuverFamily.RIGHT_TURN, 5.0, 0.1, pi / 2, 3.5)

        self.assertEqual(left[0], (5.0, 0.0))
        self.assertAlmostEqual(left[1][0], pi / 2 / 0.1)
        self.assertEqual(left[1][1], 0.1)
        self.assertEqual(right[1][1], -0.1)


    def test_lane_change_shift(self):
        segments = maneuver_segments(ManeuverFamily.LANE_CHANGE_LEFT, 0.0, 0.1, pi / 2, 3.5)
        end = segments[1][0] + segments[2][0]
        points = integrate_path(segments, np.array([end + 10.0]))
        self.assertAlmostEqual(points[0, 1], 3.5, places=9)


class TestIntegratePath(unittest.TestCase):

    def test_straight_line(self):
        points = integrate_path([(inf, 0.0)], np.arange(5.0), origin=(1.0, 2.0))
        np.testing.assert_allclose(points, [(1 + s, 2.0) for s in range(5)])


    def test_circle(self):
        radius = 4.0
        s = np.linspace(0, 2 * pi * radius, 30)
        points = integrate_path([(inf, 1 / radius)], s)

        center = np.array((0.0, radius))
        np.testing.assert_allclose(np.linalg.norm(points - center, axis=1), radius)
        np.testing.assert_allclose(points[-1], (0.0, 0.0), atol=1e-9)


    def test_continuous_at_joins(self):
        segments = [(3.0, 0.0), (2.0, 0.5), (inf, 0.0)]
        s = np.array([2.999999, 3.0, 4.999999, 5.0])
        points = integrate_path(segments, s)

        np.testing.assert_allclose(points[0], points[1], atol=1e-5)
        np.testing.assert_allclose(points[2], points[3], atol=1e-5)


class TestGenerateManeuver(unittest.TestCase):

    def test_straight(self):
        trajs = generate_maneuver(clean_spec('straight'))
        for traj in trajs:
            self.assertEqual(len(traj), 40)
            np.testing.assert_allclose(traj.points[:, 1], 0.0, atol=1e-12)
            np.testing.assert_allclose(np.diff(traj.points[:, 0]), 1.0)


    def test_turn_directions(self):
        expected = {
            'left-turn': (0.0, 1.0),
            'right-turn': (0.0, -1.0),
            'u-turn': (-1.0, 0.0),
            'lane-change-left': (1.0, 0.0),
            'lane-change-right': (1.0, 0.0),
        }
        for family, direction in expected.items():
            with self.subTest(family=family):
                traj = generate_maneuver(clean_spec(family))[0]
                np.testing.assert_allclose(final_direction(traj), direction, atol=1e-9)


    def test_lane_change_side(self):
        left = generate_maneuver(clean_spec('lane-change-left'))[0]
        right = generate_maneuver(clean_spec('lane-change-right'))[0]
        self.assertAlmostEqual(left.points[-1, 1], 3.5, places=9)
        self.assertAlmostEqual(right.points[-1, 1], -3.5, places=9)


    def test_constant_speed(self):
        traj = generate_maneuver(clean_spec('u-turn'))[1]
        steps = np.linalg.norm(np.diff(traj.points, axis=0), axis=1)
        self.assertTrue(np.all(steps <= 1.0 + 1e-9))
        self.assertTrue(np.all(steps > 0.98))


    def test_turn_angle(self):
        traj = generate_maneuver(clean_spec('left-turn', turn_angle=pi / 4))[0]
        np.testing.assert_allclose(final_direction(traj),
                                   (np.cos(pi / 4), np.sin(pi / 4)), atol=1e-9)


    def test_ids_and_labels(self):
        trajs = generate_maneuver(clean_spec('left-turn', label='lt'), position=3)
        self.assertEqual([t.id for t in trajs], ['lt-03-00000', 'lt-03-00001', 'lt-03-00002'])
        self.assertTrue(all(t.label == 'lt' for t in trajs))


    def test_deterministic(self):
        spec = clean_spec('right-turn', noise_sigma=0.1, speed=[5.0, 15.0],
                          curvature=[0.1, 0.3], origin_spread=10.0, random_heading=True)
        a = generate_maneuver(spec, 2)
        b = generate_maneuver(spec, 2)
        c = generate_maneuver(spec, 3)

        for ta, tb, tc in zip(a, b, c):
            np.testing.assert_array_equal(ta.points, tb.points)
            self.assertFalse(np.array_equal(ta.points, tc.points))


    def test_noise(self):
        clean = generate_maneuver(clean_spec('straight'))[0]
        noisy = generate_maneuver(clean_spec('straight', noise_sigma=0.05))[0]

        residual = noisy.points - clean.points
        self.assertGreater(np.abs(residual).max(), 0.0)
        self.assertLess(np.abs(residual).max(), 0.5)


class TestManeuverSpec(unittest.TestCase):

    def test_scalar_range(self):
        spec = clean_spec('straight', speed=[7.0])
        self.assertEqual(spec.speed, [7.0, 7.0])


    def test_bad_ranges(self):
        for speed in ([3.0, 1.0], [0.0, 1.0], [1.0, 2.0, 3.0]):
            with self.assertRaises(ValueError):
                clean_spec('straight', speed=speed)


    def test_turn_needs_curvature(self):
        with self.assertRaises(ValueError):
            clean_spec('left-turn', curvature=[0.0, 0.1])
        clean_spec('straight', curvature=[0.0, 0.0])


    def test_heading_change(self):
        self.assertAlmostEqual(clean_spec('u-turn').heading_change, pi)
        self.assertAlmostEqual(clean_spec('left-turn').heading_change, pi / 2)


class TestGenerate(unittest.TestCase):

    def test_from_file(self):
        spec = load_dataset_spec(DATA / 'dataset.yml')
        self.assertEqual(spec.total, 18)

        trajs = generate(spec)
        self.assertEqual(len(trajs), 18)
        self.assertEqual([t.label for t in trajs[::6]],
                         ['straight', 'left-turn', 'right-turn'])
        self.assertEqual(trajs[6].id, 'left-turn-01-00000')
        self.assertEqual(len({t.id for t in trajs}), 18)


    def test_list_of_specs(self):
        specs = [clean_spec('straight'), clean_spec('u-turn')]
        self.assertEqual(len(generate(specs)), 6)
        self.assertEqual(len(generate(DatasetSpec(maneuvers=specs))), 6)


    def test_bare_list(self):
        with TemporaryDirectory() as tmp:
            path = Path(tmp) / 'list.yml'
            path.write_text("- family: straight\n  count: 2\n")
            self.assertEqual(load_dataset_spec(path).total, 2)


    def test_bad_spec(self):
        with TemporaryDirectory() as tmp:
            path = Path(tmp) / 'bad.yml'
            path.write_text("maneuvers:\n  - family: zigzag\n")
            with self.assertRaises(ConfigError):
                load_dataset_spec(path)

            path.write_text("maneuvers: []\n")
            with self.assertRaises(ConfigError):
                load_dataset_spec(path)


# The end.
