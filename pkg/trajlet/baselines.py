"""
trajlet.baselines

Retrieval without a learned encoder, for comparison with the embedding
path. Each engine plugs into :func:`trajlet.evaluation.evaluate_engine`.

* ``matrix``: every pairwise ADE precomputed; a query scans its row.
* ``endpoint``: a k-d tree over the final points of the normalized
  trajectories.
* ``multipoint``: one k-d tree per waypoint. Each waypoint retrieves K
  candidates; a candidate's score is the sum of its distances at the
  waypoints that retrieved it, plus that waypoint's K-th distance for each
  waypoint that did not.

Distance matrix files (``.trjd``), integers little-endian::

    b'TRJD'                     magic
    u32                         format version (1)
    u32                         N
    N * (u16 + bytes)           ids, UTF-8
    f64 * N * N                 ADE values, row-major

:author: trajlet contributors
:license: GNU General Public License v3
"""


import heapq
import logging
import struct
from dataclasses import dataclass
from io import BytesIO
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import NormalizedTrajectory, PointsLike, ade_to_many, as_points, stack_points
from .exceptions import BankTooLarge, FormatError, WaypointCountMismatch
from .models.enums import RotationAnchor
from .parallel import pmap
from .retrieval import QueryResult


__all__ = (
    'MATRIX_LIMIT',
    'DistanceMatrixStore',
    'EndpointEngine',
    'KdTree',
    'MatrixEngine',
    'MultipointEngine',
    'MultipointIndex',

    'build_distance_matrix',
    'build_endpoint_tree',
    'build_multipoint_index',
    'default_waypoints',
    'load_distance_matrix',
    'query_distance_matrix',
    'query_endpoint_knn',
    'query_multipoint_knn',
    'save_distance_matrix',
)


logger = logging.getLogger(__name__)


MATRIX_LIMIT = 20000
"""
The largest bank :func:`build_distance_matrix` accepts.
"""

MATRIX_MAGIC = b'TRJD'
MATRIX_VERSION = 1


def _id_ranks(ids: Sequence[str]) -> np.ndarray:
    """
    Position of each id in sorted id order, used as the tiebreak key.
    """

    order = np.argsort(np.array(ids, dtype=str), kind='stable')
    ranks = np.empty(len(ids), dtype=np.intp)
    ranks[order] = np.arange(len(ids))
    return ranks


def _result(
        ids: Sequence[str],
        indices: np.ndarray,
        distances: np.ndarray,
        k: int) -> QueryResult:

    indices = np.asarray(indices, dtype=np.intp)
    return QueryResult(
        ids=tuple(ids[i] for i in indices),
        distances=np.asarray(distances, dtype=np.float64),
        indices=indices,
        k=k)


def _top_k(
        distances: np.ndarray,
        keys: np.ndarray,
        k: int) -> np.ndarray:

    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    return np.lexsort((keys, distances))[:k]


@dataclass(frozen=True, eq=False)
class DistanceMatrixStore:
    ids: Tuple[str, ...]
    values: np.ndarray


    def __len__(self) -> int:
        return len(self.ids)


def build_distance_matrix(
        trajectories: Sequence[NormalizedTrajectory]) -> DistanceMatrixStore:
    """
    Every pairwise ADE. The upper triangle is computed and mirrored, so
    the result is exactly symmetric with a zero diagonal.

    :raises BankTooLarge: for more than :data:`MATRIX_LIMIT` trajectories
    :raises LengthMismatch: if the trajectory lengths differ
    """

    size = len(trajectories)
    if size > MATRIX_LIMIT:
        raise BankTooLarge(
            f"a distance matrix over {size} trajectories exceeds the"
            f" limit of {MATRIX_LIMIT}")

    ids = tuple(nt.source_id for nt in trajectories)
    if not size:
        return DistanceMatrixStore(ids, np.zeros((0, 0)))

    stacked = stack_points(trajectories)
    rows = pmap(lambda i: ade_to_many(stacked[i], stacked), range(size))

    upper = np.triu(np.array(rows), 1)
    values = upper + upper.T
    values.setflags(write=False)

    logger.debug(f"Built {size}x{size} ADE matrix")
    return DistanceMatrixStore(ids, values)


def query_distance_matrix(
        store: DistanceMatrixStore,
        trajectories: Sequence[NormalizedTrajectory],
        query: NormalizedTrajectory,
        k: int = 6) -> QueryResult:
    """
    The ``k`` trajectories with the lowest ADE to ``query``. A query that
    is itself a member of the store reads its precomputed row; any other
    is compared against every trajectory.
    """

    position = _member_position(store.ids, trajectories, query)
    if position is not None:
        row = store.values[position]
    elif len(trajectories):
        row = ade_to_many(query, stack_points(trajectories))
    else:
        row = np.zeros(0)

    order = _top_k(row, _id_ranks(store.ids), k)
    return _result(store.ids, order, row[order], k)


def _member_position(
        ids: Sequence[str],
        trajectories: Sequence[NormalizedTrajectory],
        query: NormalizedTrajectory) -> Optional[int]:

    if query.source_id not in ids:
        return None
    position = ids.index(query.source_id)
    if np.array_equal(trajectories[position].points, query.points):
        return position
    return None


def _write_ids(out, ids: Sequence[str]) -> None:
    for traj_id in ids:
        encoded = traj_id.encode('utf-8')
        out.write(struct.pack('<H', len(encoded)))
        out.write(encoded)


def save_distance_matrix(store: DistanceMatrixStore, path: Union[str, Path]) -> Path:
    buffer = BytesIO()
    buffer.write(MATRIX_MAGIC)
    buffer.write(struct.pack('<II', MATRIX_VERSION, len(store)))
    _write_ids(buffer, store.ids)
    buffer.write(np.ascontiguousarray(store.values, dtype='<f8').tobytes())

    path = Path(path)
    path.write_bytes(buffer.getvalue())
    logger.info(f"Wrote distance matrix to {path}")
    return path


def load_distance_matrix(path: Union[str, Path]) -> DistanceMatrixStore:
    """
    :raises FormatError: for a bad header or a size that does not match
    """

    filename = str(path)
    data = Path(path).read_bytes()
    if data[:4] != MATRIX_MAGIC or len(data) < 12:
        raise FormatError("not a trajlet distance matrix", filename=filename)

    version, size = struct.unpack_from('<II', data, 4)
    if version != MATRIX_VERSION:
        raise FormatError(f"unsupported distance matrix version {version}",
                          filename=filename)

    offset = 12
    ids = []
    try:
        for _ in range(size):
            length, = struct.unpack_from('<H', data, offset)
            ids.append(data[offset + 2:offset + 2 + length].decode('utf-8'))
            offset += 2 + length
    except struct.error as e:
        raise FormatError("distance matrix id table is truncated",
                          filename=filename, original_exception=e) from e

    if len(data) - offset != 8 * size * size:
        raise FormatError("distance matrix values are truncated",
                          filename=filename)

    values = np.frombuffer(data, dtype='<f8', offset=offset).reshape(size, size)
    return DistanceMatrixStore(tuple(ids), values.astype(np.float64))


class KdTree:
    """
    A balanced 2-d tree over a fixed set of points, built by median splits
    on alternating axes. Queries return the exact K nearest points ordered
    by (distance, key), where ``keys`` default to the point positions.
    """

    def __init__(self, points: np.ndarray, keys: Optional[np.ndarray] = None):
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2:
            raise ValueError(f"expected (N, d) points, got {points.shape}")

        self.points = points
        self.keys = (np.arange(len(points)) if keys is None
                     else np.asarray(keys, dtype=np.intp))

        count = len(points)
        self._item = np.full(count, -1, dtype=np.intp)
        self._axis = np.zeros(count, dtype=np.intp)
        self._left = np.full(count, -1, dtype=np.intp)
        self._right = np.full(count, -1, dtype=np.intp)
        self._next = 0

        self.root = self._build(np.arange(count), 0)


    def __len__(self) -> int:
        return len(self.points)


    def _build(self, members: np.ndarray, depth: int) -> int:
        if not len(members):
            return -1

        axis = depth % self.points.shape[1]
        order = np.lexsort((members, self.points[members, axis]))
        members = members[order]
        middle = len(members) // 2

        node = self._next
        self._next += 1
        self._item[node] = members[middle]
        self._axis[node] = axis
        self._left[node] = self._build(members[:middle], depth + 1)
        self._right[node] = self._build(members[middle + 1:], depth + 1)
        return node


    def query(self, point: Sequence[float], k: int = 1) -> Tuple[np.ndarray, np.ndarray]:
        """
        The positions and Euclidean distances of the ``k`` nearest points,
        nearest first.
        """

        if k < 1:
            raise ValueError(f"k must be at least 1, got {k}")

        target = np.asarray(point, dtype=np.float64)
        heap: List[Tuple[float, int, int]] = []

        def offer(item: int):
            diff = self.points[item] - target
            d2 = float(diff @ diff)
            entry = (-d2, -int(self.keys[item]), item)
            if len(heap) < k:
                heapq.heappush(heap, entry)
            elif (d2, self.keys[item]) < (-heap[0][0], -heap[0][1]):
                heapq.heapreplace(heap, entry)

        def visit(node: int):
            if node < 0:
                return
            item = self._item[node]
            offer(item)

            axis = self._axis[node]
            delta = target[axis] - self.points[item, axis]
            near, far = ((self._left[node], self._right[node]) if delta < 0
                         else (self._right[node], self._left[node]))

            visit(near)
            # a tie on the plane can still beat the worst kept key
            if len(heap) < k or delta * delta <= -heap[0][0]:
                visit(far)

        visit(self.root)

        found = sorted((-neg_d2, -neg_key, item) for neg_d2, neg_key, item in heap)
        items = np.array([item for _, _, item in found], dtype=np.intp)
        dists = np.sqrt(np.array([d2 for d2, _, _ in found], dtype=np.float64))
        return items, dists


def build_endpoint_tree(
        trajectories: Sequence[NormalizedTrajectory]) -> KdTree:
    ids = [nt.source_id for nt in trajectories]
    ends = (np.array([as_points(nt)[-1] for nt in trajectories])
            if len(trajectories) else np.zeros((0, 2)))
    return KdTree(ends, _id_ranks(ids))


def query_endpoint_knn(
        tree: KdTree,
        ids: Sequence[str],
        query: PointsLike,
        k: int = 6) -> QueryResult:
    """
    The ``k`` trajectories whose final points lie nearest the query's.
    """

    if not len(tree):
        raise ValueError("endpoint tree is empty")
    items, dists = tree.query(as_points(query)[-1], k)
    return _result(ids, items, dists, k)


def default_waypoints(length: int, count: int = 4) -> List[int]:
    """
    ``count`` time indices spread evenly after the start, ending at the
    final point.
    """

    count = max(1, min(count, length - 1))
    return [round((i + 1) * (length - 1) / count) for i in range(count)]


@dataclass(frozen=True, eq=False)
class MultipointIndex:
    waypoints: Tuple[int, ...]
    trees: Tuple[KdTree, ...]


def build_multipoint_index(
        trajectories: Sequence[NormalizedTrajectory],
        waypoints: Sequence[int]) -> MultipointIndex:
    """
    One k-d tree per waypoint over the bank's points at that time index.
    """

    ranks = _id_ranks([nt.source_id for nt in trajectories])
    stacked = stack_points(trajectories)
    trees = tuple(KdTree(stacked[:, w], ranks) for w in waypoints)
    return MultipointIndex(tuple(waypoints), trees)


def query_multipoint_knn(
        index: MultipointIndex,
        ids: Sequence[str],
        reference_points: Sequence[Sequence[float]],
        k: int = 6) -> QueryResult:
    """
    Score every trajectory retrieved at any waypoint and keep the ``k``
    lowest scores.

    :raises WaypointCountMismatch: if there is not one reference point per
      waypoint
    """

    refs = np.asarray(reference_points, dtype=np.float64).reshape(-1, 2)
    if len(refs) != len(index.trees):
        raise WaypointCountMismatch(
            f"{len(refs)} reference points for {len(index.trees)} waypoints")

    retrieved = [tree.query(ref, k) for tree, ref in zip(index.trees, refs)]

    candidates = np.unique(np.concatenate([items for items, _ in retrieved]))
    scores = np.zeros(len(candidates), dtype=np.float64)
    for items, dists in retrieved:
        kth = dists[-1]
        found = dict(zip(items.tolist(), dists.tolist()))
        scores += np.array([found.get(int(c), kth) for c in candidates])

    keys = index.trees[0].keys[candidates]
    order = _top_k(scores, keys, k)
    return _result(ids, candidates[order], scores[order], k)


class _BaselineEngine:
    name = 'baseline'

    def __init__(
            self,
            trajectories: Sequence[NormalizedTrajectory],
            anchor: RotationAnchor = RotationAnchor.DISPLACEMENT):

        self.trajectories = tuple(trajectories)
        self.ids = [nt.source_id for nt in self.trajectories]
        self.anchor = RotationAnchor(anchor)


    def search_member(self, position: int, k: int) -> QueryResult:
        return self.search(self.trajectories[position], k)


class MatrixEngine(_BaselineEngine):
    name = 'matrix'

    def __init__(
            self,
            trajectories: Sequence[NormalizedTrajectory],
            store: Optional[DistanceMatrixStore] = None,
            anchor: RotationAnchor = RotationAnchor.DISPLACEMENT):

        super().__init__(trajectories, anchor)
        self.store = store or build_distance_matrix(self.trajectories)


    def search(self, query: NormalizedTrajectory, k: int) -> QueryResult:
        return query_distance_matrix(self.store, self.trajectories, query, k)


class EndpointEngine(_BaselineEngine):
    name = 'endpoint'

    def __init__(
            self,
            trajectories: Sequence[NormalizedTrajectory],
            anchor: RotationAnchor = RotationAnchor.DISPLACEMENT):

        super().__init__(trajectories, anchor)
        self.tree = build_endpoint_tree(self.trajectories)


    def search(self, query: NormalizedTrajectory, k: int) -> QueryResult:
        return query_endpoint_knn(self.tree, self.ids, query, k)


class MultipointEngine(_BaselineEngine):
    name = 'multipoint'

    def __init__(
            self,
            trajectories: Sequence[NormalizedTrajectory],
            waypoints: Optional[Sequence[int]] = None,
            anchor: RotationAnchor = RotationAnchor.DISPLACEMENT):

        super().__init__(trajectories, anchor)
        if not self.trajectories:
            raise ValueError("multipoint KNN needs at least one trajectory")
        if waypoints is None:
            waypoints = default_waypoints(len(self.trajectories[0]))
        self.index = build_multipoint_index(self.trajectories, waypoints)


    def search(self, query: NormalizedTrajectory, k: int) -> QueryResult:
        refs = as_points(query)[list(self.index.waypoints)]
        return query_multipoint_knn(self.index, self.ids, refs, k)


# The end.
