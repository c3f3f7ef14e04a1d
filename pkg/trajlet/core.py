"""
trajlet.core

Trajectory value types, agent-centric normalization, and the point-sequence
distances (ADE, FDE) used by every other module. Geometry is float64
throughout.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import logging
from dataclasses import dataclass, field
from math import atan2, cos, hypot, sin
from typing import Optional, Sequence, Union

import numpy as np

from .exceptions import (
    DegenerateTrajectory, EmptySequence, InvalidTrajectory, LengthMismatch,
)
from .models.enums import RotationAnchor


__all__ = (
    'DIRECTION_EPS',
    'DisplacementVector',
    'NormalizedTrajectory',
    'PointsLike',
    'Trajectory',
    'Transform',

    'ade',
    'ade_to_many',
    'as_points',
    'denormalize',
    'displacement',
    'fde',
    'normalize',
    'rotation_matrix',
    'stack_points',
)


logger = logging.getLogger(__name__)


DIRECTION_EPS = 1e-9
"""
Vectors shorter than this, in meters, have no usable direction.
"""


def _frozen_points(points, what: str = "trajectory") -> np.ndarray:
    arr = np.array(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidTrajectory(
            f"{what} points must have shape (T, 2), got {arr.shape}")
    if arr.shape[0] < 2:
        raise DegenerateTrajectory(
            f"{what} needs at least 2 points, got {arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise InvalidTrajectory(f"{what} has non-finite coordinates")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    A raw trajectory: ``T >= 2`` time-ordered (x, y) points in meters at a
    uniform, implicit timestep.
    """

    id: str
    points: np.ndarray
    label: Optional[str] = None


    def __post_init__(self):
        object.__setattr__(
            self, 'points', _frozen_points(self.points, f"trajectory {self.id!r}"))


    def __len__(self) -> int:
        return len(self.points)


    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.id == other.id and self.label == other.label and
                np.array_equal(self.points, other.points))


@dataclass(frozen=True)
class Transform:
    """
    The rigid transform into the canonical frame: translate by
    ``translation``, then rotate by ``rotation`` radians.
    """

    translation: tuple = (0.0, 0.0)
    rotation: float = 0.0


    def apply(self, points: np.ndarray) -> np.ndarray:
        shifted = np.asarray(points, dtype=np.float64) + np.asarray(self.translation)
        return shifted @ rotation_matrix(self.rotation).T


    def invert(self, points: np.ndarray) -> np.ndarray:
        unrotated = np.asarray(points, dtype=np.float64) @ rotation_matrix(-self.rotation).T
        return unrotated - np.asarray(self.translation)


@dataclass(frozen=True, eq=False)
class NormalizedTrajectory:
    """
    A trajectory in the agent-centric frame. The first point is exactly the
    origin; ``transform`` maps the source trajectory onto these points.
    """

    points: np.ndarray
    transform: Transform = field(default_factory=Transform)
    source_id: str = ""
    label: Optional[str] = None


    def __post_init__(self):
        object.__setattr__(
            self, 'points',
            _frozen_points(self.points, f"trajectory {self.source_id!r}"))


    def __len__(self) -> int:
        return len(self.points)


    def __eq__(self, other):
        if not isinstance(other, NormalizedTrajectory):
            return NotImplemented
        return (self.source_id == other.source_id and
                self.label == other.label and
                self.transform == other.transform and
                np.array_equal(self.points, other.points))


@dataclass(frozen=True)
class DisplacementVector:
    dx: float
    dy: float


    @property
    def norm(self) -> float:
        return hypot(self.dx, self.dy)


    def as_array(self) -> np.ndarray:
        return np.array((self.dx, self.dy), dtype=np.float64)


PointsLike = Union[Trajectory, NormalizedTrajectory, np.ndarray, Sequence]


def as_points(value: PointsLike) -> np.ndarray:
    """
    The (T, 2) float64 point array behind a trajectory, normalized
    trajectory, or plain sequence of pairs.
    """

    if isinstance(value, (Trajectory, NormalizedTrajectory)):
        return value.points

    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 0:
        return arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidTrajectory(f"expected (T, 2) points, got shape {arr.shape}")
    return arr


def stack_points(trajectories: Sequence[PointsLike]) -> np.ndarray:
    """
    Stack equal-length trajectories into an (N, T, 2) array.

    :raises LengthMismatch: if the lengths differ
    """

    if not trajectories:
        return np.zeros((0, 0, 2), dtype=np.float64)

    arrays = [as_points(t) for t in trajectories]
    length = len(arrays[0])
    for index, arr in enumerate(arrays):
        if len(arr) != length:
            raise LengthMismatch(
                f"trajectory has {len(arr)} points, expected {length}",
                index=index)
    return np.stack(arrays)


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = cos(theta), sin(theta)
    return np.array(((c, -s), (s, c)), dtype=np.float64)


def _first_segment(shifted: np.ndarray) -> Optional[np.ndarray]:
    steps = np.diff(shifted, axis=0)
    lengths = np.hypot(steps[:, 0], steps[:, 1])
    moving = np.flatnonzero(lengths >= DIRECTION_EPS)
    if len(moving):
        return steps[moving[0]]
    return None


def normalize(
        traj: Union[Trajectory, PointsLike],
        anchor: RotationAnchor = RotationAnchor.DISPLACEMENT) -> NormalizedTrajectory:
    """
    Shift ``traj`` so it starts at the origin and rotate it so the anchor
    direction points along +x.

    With the default ``displacement`` anchor the overall displacement (last
    point minus first) is rotated onto +x. When that is shorter than
    :data:`DIRECTION_EPS` the first segment with nonzero length is used,
    and when every point coincides the rotation is the identity. The
    ``heading`` anchor always uses that first nonzero segment.

    :raises DegenerateTrajectory: if the trajectory has fewer than 2 points
    """

    if isinstance(traj, Trajectory):
        source_id, label = traj.id, traj.label
    elif isinstance(traj, NormalizedTrajectory):
        source_id, label = traj.source_id, traj.label
    else:
        source_id, label = "", None

    points = as_points(traj)
    if len(points) < 2:
        raise DegenerateTrajectory(
            f"trajectory {source_id!r} needs at least 2 points, got {len(points)}")

    origin = points[0]
    shifted = points - origin

    direction = None
    if RotationAnchor(anchor) == RotationAnchor.DISPLACEMENT:
        delta = shifted[-1]
        if hypot(delta[0], delta[1]) >= DIRECTION_EPS:
            direction = delta
    if direction is None:
        direction = _first_segment(shifted)

    rotation = 0.0
    if direction is not None:
        rotation = -atan2(direction[1], direction[0])

    transform = Transform(
        translation=(-float(origin[0]), -float(origin[1])),
        rotation=rotation)

    canonical = shifted @ rotation_matrix(rotation).T
    canonical[0] = 0.0

    return NormalizedTrajectory(
        points=canonical,
        transform=transform,
        source_id=source_id,
        label=label)


def denormalize(nt: NormalizedTrajectory) -> Trajectory:
    """
    Map a normalized trajectory back into its source frame.
    """

    return Trajectory(
        id=nt.source_id,
        points=nt.transform.invert(nt.points),
        label=nt.label)


def displacement(nt: PointsLike) -> DisplacementVector:
    points = as_points(nt)
    delta = points[-1] - points[0]
    return DisplacementVector(float(delta[0]), float(delta[1]))


def ade(a: PointsLike, b: PointsLike) -> float:
    """
    Average displacement error, the mean pointwise Euclidean distance.

    :raises LengthMismatch: when the sequences differ in length
    :raises EmptySequence: when both are empty
    """

    pa, pb = as_points(a), as_points(b)
    if len(pa) != len(pb):
        raise LengthMismatch(
            f"ADE needs equal lengths, got {len(pa)} and {len(pb)}")
    if not len(pa):
        raise EmptySequence("ADE of empty sequences")

    diff = pa - pb
    return float(np.hypot(diff[:, 0], diff[:, 1]).mean())


def ade_to_many(query: PointsLike, stacked: np.ndarray) -> np.ndarray:
    """
    ADE from ``query`` to each trajectory of an (N, T, 2) stack.
    """

    q = as_points(query)
    if stacked.ndim != 3 or stacked.shape[1:] != q.shape:
        raise LengthMismatch(
            f"cannot compare {q.shape} points against stack {stacked.shape}")
    diff = stacked - q
    return np.hypot(diff[..., 0], diff[..., 1]).mean(axis=1)


def fde(a: PointsLike, b: PointsLike) -> float:
    """
    Final displacement error, the distance between the last points.

    :raises EmptySequence: if either sequence is empty
    """

    pa, pb = as_points(a), as_points(b)
    if not len(pa) or not len(pb):
        raise EmptySequence("FDE needs nonempty sequences")

    diff = pa[-1] - pb[-1]
    return float(hypot(diff[0], diff[1]))


# The end.
