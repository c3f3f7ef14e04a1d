"""
trajlet.synth

Labelled synthetic maneuvers. Each trajectory is driven at a constant
speed along a path of constant-curvature pieces (straight lines and
circular arcs), integrated exactly, then sampled every ``dt`` seconds and
perturbed with isotropic Gaussian noise.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import logging
from math import acos, cos, inf, sin
from pathlib import Path
from typing import Any, List, Sequence, Tuple, Union

import numpy as np

from .core import Trajectory
from .loader import load_yaml
from .models import DatasetSpec, ManeuverFamily, ManeuverSpec, parse_model
from .parallel import pmap
from .rng import generator


__all__ = (
    'Segment',

    'generate',
    'generate_maneuver',
    'integrate_path',
    'load_dataset_spec',
    'maneuver_segments',
)


logger = logging.getLogger(__name__)


Segment = Tuple[float, float]
"""
(arc length, signed curvature). Positive curvature turns left.
"""


def maneuver_segments(
        family: ManeuverFamily,
        approach: float,
        curvature: float,
        heading_change: float,
        lane_width: float) -> List[Segment]:
    """
    The path of one maneuver: ``approach`` meters straight, the maneuver
    itself, then straight on forever.
    """

    family = ManeuverFamily(family)
    if family == ManeuverFamily.STRAIGHT:
        return [(inf, 0.0)]

    if family in (ManeuverFamily.LANE_CHANGE_LEFT,
                  ManeuverFamily.LANE_CHANGE_RIGHT):
        # two opposite arcs of equal angle, shifting sideways by lane_width
        angle = acos(max(-1.0, 1.0 - lane_width * curvature / 2.0))
        sign = 1.0 if family == ManeuverFamily.LANE_CHANGE_LEFT else -1.0
        arc = angle / curvature
        return [(approach, 0.0),
                (arc, sign * curvature),
                (arc, -sign * curvature),
                (inf, 0.0)]

    sign = -1.0 if family == ManeuverFamily.RIGHT_TURN else 1.0
    return [(approach, 0.0),
            (heading_change / curvature, sign * curvature),
            (inf, 0.0)]


def _advance(
        x: np.ndarray, y: np.ndarray, theta: float,
        ds: np.ndarray, kappa: float) -> Tuple[np.ndarray, np.ndarray]:

    if kappa == 0.0:
        return x + ds * cos(theta), y + ds * sin(theta)

    turned = theta + kappa * ds
    return (x + (np.sin(turned) - sin(theta)) / kappa,
            y + (cos(theta) - np.cos(turned)) / kappa)


def integrate_path(
        segments: Sequence[Segment],
        arc_lengths: np.ndarray,
        origin: Tuple[float, float] = (0.0, 0.0),
        heading: float = 0.0) -> np.ndarray:
    """
    Positions at the given arc lengths along a piecewise constant-curvature
    path, as a (T, 2) array.
    """

    s = np.asarray(arc_lengths, dtype=np.float64)
    points = np.zeros((len(s), 2), dtype=np.float64)

    x0, y0 = float(origin[0]), float(origin[1])
    theta = heading
    start = 0.0

    for length, kappa in segments:
        end = start + length
        inside = (s >= start) & (s < end)
        if inside.any():
            px, py = _advance(np.full(inside.sum(), x0), np.full(inside.sum(), y0),
                              theta, s[inside] - start, kappa)
            points[inside, 0] = px
            points[inside, 1] = py

        if length == inf:
            break

        ex, ey = _advance(np.array([x0]), np.array([y0]), theta,
                          np.array([length]), kappa)
        x0, y0 = float(ex[0]), float(ey[0])
        theta += kappa * length
        start = end

    return points


def generate_maneuver(spec: ManeuverSpec, position: int = 0) -> List[Trajectory]:
    """
    The ``spec.count`` trajectories of one maneuver spec. Draws come from
    the ``data`` stream of ``spec.seed``, keyed by ``position``, the spec's
    place in its dataset.
    """

    rng = generator(spec.seed, 'data', position)
    label = spec.label_or_family
    steps = np.arange(spec.length, dtype=np.float64)

    found = []
    for j in range(spec.count):
        speed = rng.uniform(*spec.speed)
        curvature = rng.uniform(*spec.curvature)
        offset = rng.uniform(-spec.origin_spread, spec.origin_spread, size=2)
        heading = rng.uniform(-np.pi, np.pi) if spec.random_heading else 0.0

        step = speed * spec.dt
        horizon = step * (spec.length - 1)
        segments = maneuver_segments(
            spec.family, spec.approach * horizon, curvature,
            spec.heading_change, spec.lane_width)

        points = integrate_path(segments, steps * step,
                                origin=(float(offset[0]), float(offset[1])),
                                heading=heading)
        if spec.noise_sigma > 0:
            points = points + rng.normal(0.0, spec.noise_sigma, size=points.shape)

        found.append(Trajectory(
            id=f"{label}-{position:02d}-{j:05d}",
            points=points,
            label=label))

    return found


def generate(specs: Union[DatasetSpec, Sequence[ManeuverSpec]]) -> List[Trajectory]:
    """
    Every trajectory of every spec, spec by spec in the given order.
    """

    if isinstance(specs, DatasetSpec):
        specs = specs.maneuvers

    batches = pmap(lambda pair: generate_maneuver(pair[1], pair[0]),
                   list(enumerate(specs)))

    found = [traj for batch in batches for traj in batch]
    logger.debug(f"Generated {len(found)} trajectories from {len(batches)} specs")
    return found


def load_dataset_spec(filename: Union[str, Path]) -> DatasetSpec:
    """
    Read a dataset spec from YAML or JSON. A bare list is taken as the list
    of maneuvers.

    :raises ParseError: if the file does not parse
    :raises ConfigError: if it does not describe a valid dataset
    """

    data: Any = load_yaml(filename)
    if isinstance(data, list):
        data = {'maneuvers': data}
    return parse_model(DatasetSpec, data, what="dataset", filename=str(filename))


# The end.
