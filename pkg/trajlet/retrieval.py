"""
trajlet.retrieval

Embedding banks and nearest-neighbour search over them: an exact scan and
an inverted-file (IVF) index built with spherical k-means.

Distances are Euclidean between unit embeddings, which ranks exactly as
descending cosine similarity would. Ties are broken by trajectory id.

Bank files (``.trjb``), all integers little-endian::

    b'TRJB'                     magic
    u32                         format version (1)
    u32                         N, number of rows
    u32                         d_emb
    N * (u16 + bytes)           ids, UTF-8
    f32 * N * d_emb             unit embeddings, row-major

The trajectories behind the rows are written beside it as ``bank.trj`` in
their normalized frame, with a ``bank.yml`` manifest holding the bank
metadata and the normalizing transform of every row.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import logging
import struct
from dataclasses import dataclass
from io import BytesIO
from pathlib import Path
from typing import (
    Any, BinaryIO, Dict, Iterable, List, Optional, Sequence, Tuple, Union,
)

import numpy as np
from yaml import safe_dump

from .checkpoint import Checkpoint
from .core import NormalizedTrajectory, Trajectory, Transform, normalize
from .encoder import embed
from .exceptions import (
    EncodingError, FormatError, TooFewVectors, TrajletError, UnknownId,
)
from .loader import load_trajectories, load_yaml, save_trajectories
from .models.enums import RotationAnchor
from .parallel import pmap
from .rng import generator


__all__ = (
    'BANK_FILE',
    'BANK_MAGIC',
    'BANK_VERSION',
    'KMEANS_ITERATIONS',
    'EmbeddingBank',
    'IvfIndex',
    'QueryResult',

    'build_bank',
    'build_ivf',
    'checkpoint_anchor',
    'embed_query',
    'load_bank',
    'normalize_all',
    'read_bank',
    'retrieve_trajectories',
    'save_bank',
    'search_exact',
    'search_ivf',
    'write_bank',
)


logger = logging.getLogger(__name__)


BANK_MAGIC = b'TRJB'
BANK_VERSION = 1
BANK_FILE = 'bank.trjb'
BANK_TRAJECTORIES = 'bank.trj'
BANK_MANIFEST = 'bank.yml'

KMEANS_ITERATIONS = 25


def _as_f32_rows(values: np.ndarray) -> np.ndarray:
    return np.asarray(values, dtype=np.float32).astype(np.float64)


class EmbeddingBank:
    """
    Unit embeddings of a set of trajectories, with the trajectories
    themselves. Rows are kept at float32 precision, exactly as a bank file
    stores them, and are read-only.
    """

    def __init__(
            self,
            ids: Sequence[str],
            embeddings: np.ndarray,
            trajectories: Sequence[NormalizedTrajectory],
            metadata: Optional[Dict[str, Any]] = None):

        ids = tuple(ids)
        rows = np.asarray(embeddings, dtype=np.float64)
        if rows.ndim != 2:
            raise ValueError(f"embeddings must be a matrix, got shape {rows.shape}")

        if not (len(ids) == len(rows) == len(trajectories)):
            raise ValueError(
                f"bank is misaligned: {len(ids)} ids, {len(rows)} rows,"
                f" {len(trajectories)} trajectories")

        index = {}
        for position, traj_id in enumerate(ids):
            if traj_id in index:
                raise ValueError(f"duplicate id {traj_id!r} in bank")
            index[traj_id] = position

        rows = _as_f32_rows(rows)
        if len(rows):
            norms = np.linalg.norm(rows, axis=1)
            off = np.flatnonzero(np.abs(norms - 1.0) > 1e-6)
            if len(off):
                raise ValueError(
                    f"bank row {int(off[0])} has norm {norms[off[0]]}")
        rows.setflags(write=False)

        self.ids = ids
        self.embeddings = rows
        self.trajectories = tuple(trajectories)
        self.metadata = dict(metadata or {})
        self._index = index
        self._id_keys = np.array(ids, dtype=str) if ids else np.zeros(0, dtype=str)


    def __len__(self) -> int:
        return len(self.ids)


    @property
    def d_emb(self) -> int:
        return self.embeddings.shape[1]


    def position(self, traj_id: str) -> int:
        """
        :raises UnknownId: if the bank has no such id
        """

        try:
            return self._index[traj_id]
        except KeyError:
            raise UnknownId(f"no trajectory {traj_id!r} in the bank") from None


    def labels(self) -> List[Optional[str]]:
        return [nt.label for nt in self.trajectories]


@dataclass(frozen=True, eq=False)
class QueryResult:
    """
    The neighbours of one query, nearest first. ``indices`` are bank row
    positions aligned with ``ids``.
    """

    ids: Tuple[str, ...]
    distances: np.ndarray
    indices: np.ndarray
    k: int


    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True, eq=False)
class IvfIndex:
    """
    ``lists[c]`` holds, ascending, the bank rows assigned to centroid ``c``.
    """

    centroids: np.ndarray
    lists: Tuple[np.ndarray, ...]
    build_seed: int

    @property
    def nlist(self) -> int:
        return len(self.centroids)


def checkpoint_anchor(ckpt: Checkpoint) -> RotationAnchor:
    """
    The rotation anchor a checkpoint was trained with.
    """

    return RotationAnchor(ckpt.get('anchor', RotationAnchor.DISPLACEMENT.value))


def normalize_all(
        trajectories: Iterable[Union[Trajectory, NormalizedTrajectory]],
        anchor: RotationAnchor = RotationAnchor.DISPLACEMENT) -> List[NormalizedTrajectory]:
    """
    Normalize raw trajectories; already-normalized ones pass through.
    """

    return [t if isinstance(t, NormalizedTrajectory) else normalize(t, anchor)
            for t in trajectories]


def embed_query(ckpt: Checkpoint, nt: NormalizedTrajectory) -> np.ndarray:
    """
    The eval-mode unit embedding of ``nt`` at bank precision, so a query
    identical to a bank member lands on its row exactly.

    :raises EncodingError: wrapping any encoder failure
    """

    try:
        return _as_f32_rows(embed(ckpt.params, [nt]))[0]
    except TrajletError as e:
        raise EncodingError(nt.source_id, e) from e


def build_bank(
        trajectories: Sequence[Union[Trajectory, NormalizedTrajectory]],
        ckpt: Checkpoint,
        anchor: Optional[RotationAnchor] = None) -> EmbeddingBank:
    """
    Embed every trajectory with ``ckpt`` in eval mode. Raw trajectories are
    normalized with ``anchor``, by default the checkpoint's own.

    :raises EncodingError: naming the first trajectory that fails to embed
    """

    if anchor is None:
        anchor = checkpoint_anchor(ckpt)

    normalized = normalize_all(trajectories, anchor)
    rows = pmap(lambda nt: embed_query(ckpt, nt), normalized)

    d_emb = ckpt.config.d_emb
    matrix = np.stack(rows) if rows else np.zeros((0, d_emb))

    logger.info(f"Embedded {len(normalized)} trajectories into a bank")
    return EmbeddingBank(
        ids=[nt.source_id for nt in normalized],
        embeddings=matrix,
        trajectories=normalized,
        metadata={'anchor': RotationAnchor(anchor).value, 'd_emb': d_emb})


def _distances(rows: np.ndarray, query: np.ndarray) -> np.ndarray:
    diff = rows - query
    return np.sqrt((diff * diff).sum(axis=1))


def _rank(
        bank: EmbeddingBank,
        candidates: np.ndarray,
        query: np.ndarray,
        k: int) -> QueryResult:

    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")

    if not len(candidates):
        return QueryResult((), np.zeros(0), np.zeros(0, dtype=np.intp), k)

    dist = _distances(bank.embeddings[candidates], query)

    if k < len(candidates):
        # everything tied with the k-th distance stays in for the id tiebreak
        cutoff = np.partition(dist, k - 1)[k - 1]
        keep = np.flatnonzero(dist <= cutoff)
        candidates, dist = candidates[keep], dist[keep]

    order = np.lexsort((bank._id_keys[candidates], dist))[:k]
    chosen = candidates[order]

    return QueryResult(
        ids=tuple(bank.ids[i] for i in chosen),
        distances=dist[order],
        indices=chosen,
        k=k)


def search_exact(
        bank: EmbeddingBank,
        query: np.ndarray,
        k: int = 6) -> QueryResult:
    """
    The ``k`` bank rows nearest ``query`` by a full scan.
    """

    query = np.asarray(query, dtype=np.float64)
    return _rank(bank, np.arange(len(bank)), query, k)


def _assign(rows: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    sq = ((rows[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=-1)
    return np.argmin(sq, axis=1)


def _fill_empty(
        rows: np.ndarray,
        centroids: np.ndarray,
        assignment: np.ndarray) -> None:

    nlist = len(centroids)
    for c in range(nlist):
        counts = np.bincount(assignment, minlength=nlist)
        if counts[c]:
            continue

        largest = int(np.argmax(counts))
        members = np.flatnonzero(assignment == largest)
        if len(members) < 2:
            continue

        spread = _distances(rows[members], centroids[largest])
        farthest = int(members[np.argmax(spread)])
        centroids[c] = rows[farthest]
        assignment[farthest] = c
        logger.debug(f"k-means: reseeded empty list {c} from row {farthest}")


def build_ivf(
        bank: EmbeddingBank,
        nlist: int,
        seed: int = 0,
        iterations: int = KMEANS_ITERATIONS) -> IvfIndex:
    """
    Partition the bank with spherical k-means: centroids start at ``nlist``
    distinct rows drawn from the ``kmeans`` stream of ``seed``, then run
    ``iterations`` rounds of assign and re-center. A list left empty is
    given the member of the largest list farthest from that list's
    centroid.

    :raises TooFewVectors: if the bank has fewer than ``nlist`` rows
    """

    if nlist < 1:
        raise ValueError(f"nlist must be at least 1, got {nlist}")
    if len(bank) < nlist:
        raise TooFewVectors(
            f"an IVF index with {nlist} lists needs at least {nlist} rows,"
            f" the bank has {len(bank)}")

    rows = bank.embeddings
    rng = generator(seed, 'kmeans')
    start = np.sort(rng.choice(len(bank), size=nlist, replace=False))
    centroids = rows[start].copy()

    for iteration in range(iterations):
        assignment = _assign(rows, centroids)
        _fill_empty(rows, centroids, assignment)

        for c in range(nlist):
            members = rows[assignment == c]
            mean = members.sum(axis=0)
            norm = np.linalg.norm(mean)
            if norm > 0:
                centroids[c] = mean / norm

    assignment = _assign(rows, centroids)
    _fill_empty(rows, centroids, assignment)

    lists = tuple(np.flatnonzero(assignment == c) for c in range(nlist))
    sizes = [len(members) for members in lists]
    logger.debug(f"IVF index: {nlist} lists, sizes {min(sizes)}..{max(sizes)}")

    centroids.setflags(write=False)
    return IvfIndex(centroids=centroids, lists=lists, build_seed=seed)


def search_ivf(
        index: IvfIndex,
        bank: EmbeddingBank,
        query: np.ndarray,
        k: int = 6,
        nprobe: int = 1) -> QueryResult:
    """
    Scan the lists of the ``nprobe`` centroids nearest ``query`` and rank
    their members exactly. With ``nprobe == nlist`` this is
    :func:`search_exact`.
    """

    if not 1 <= nprobe <= index.nlist:
        raise ValueError(f"nprobe must be in 1..{index.nlist}, got {nprobe}")

    query = np.asarray(query, dtype=np.float64)
    to_centroid = _distances(index.centroids, query)
    probed = np.lexsort((np.arange(index.nlist), to_centroid))[:nprobe]

    candidates = np.sort(np.concatenate([index.lists[c] for c in probed]))
    return _rank(bank, candidates, query, k)


def retrieve_trajectories(
        bank: EmbeddingBank,
        result: QueryResult) -> List[NormalizedTrajectory]:
    """
    The bank trajectories of ``result``, in result order.

    :raises UnknownId: if an id is not in the bank
    """

    return [bank.trajectories[bank.position(traj_id)] for traj_id in result.ids]


def write_bank(bank: EmbeddingBank, out: BinaryIO) -> None:
    out.write(BANK_MAGIC)
    out.write(struct.pack('<III', BANK_VERSION, len(bank), bank.d_emb))
    for traj_id in bank.ids:
        encoded = traj_id.encode('utf-8')
        out.write(struct.pack('<H', len(encoded)))
        out.write(encoded)
    out.write(bank.embeddings.astype('<f4').tobytes(order='C'))


def read_bank(
        source: BinaryIO,
        trajectories: Sequence[NormalizedTrajectory],
        metadata: Optional[Dict[str, Any]] = None,
        filename: Optional[str] = None) -> EmbeddingBank:
    """
    :raises FormatError: for a bad header, a truncated file, or a
      trajectory payload that does not line up with the id table
    """

    data = source.read()
    if data[:4] != BANK_MAGIC:
        raise FormatError("not a trajlet bank (bad magic)", filename=filename)
    if len(data) < 16:
        raise FormatError("bank is truncated", filename=filename)

    version, count, d_emb = struct.unpack_from('<III', data, 4)
    if version != BANK_VERSION:
        raise FormatError(f"unsupported bank version {version}",
                          filename=filename)

    offset = 16
    ids = []
    try:
        for _ in range(count):
            size, = struct.unpack_from('<H', data, offset)
            offset += 2
            if offset + size > len(data):
                raise struct.error("id past end of data")
            ids.append(data[offset:offset + size].decode('utf-8'))
            offset += size
    except struct.error as e:
        raise FormatError("bank id table is truncated", filename=filename,
                          original_exception=e) from e

    expected = 4 * count * d_emb
    if len(data) - offset != expected:
        raise FormatError(
            f"bank holds {len(data) - offset} bytes of rows,"
            f" expected {expected}", filename=filename)

    rows = np.frombuffer(data, dtype='<f4', offset=offset).reshape(count, d_emb)

    by_id = {nt.source_id: nt for nt in trajectories}
    missing = [traj_id for traj_id in ids if traj_id not in by_id]
    if missing or len(by_id) != len(ids):
        raise FormatError(
            "bank trajectories do not match its id table", filename=filename)

    meta = dict(metadata or {})
    meta.setdefault('d_emb', d_emb)
    try:
        return EmbeddingBank(ids, rows, [by_id[i] for i in ids], meta)
    except ValueError as e:
        raise FormatError(f"bank is inconsistent: {e}", filename=filename,
                          original_exception=e) from e


def _transform_values(transform: Transform) -> List[float]:
    tx, ty = transform.translation
    return [float(tx), float(ty), float(transform.rotation)]


def _transform(values: Optional[Sequence[float]]) -> Transform:
    if not values:
        return Transform()
    tx, ty, rotation = values
    return Transform(translation=(float(tx), float(ty)),
                     rotation=float(rotation))


def save_bank(bank: EmbeddingBank, directory: Union[str, Path]) -> Path:
    """
    Write ``bank.trjb``, ``bank.trj`` and ``bank.yml`` into ``directory``.
    The manifest keeps each row's normalizing transform so loaded
    trajectories can still be mapped back to their source frame. Returns the
    path of the bank file.
    """

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    buffer = BytesIO()
    write_bank(bank, buffer)
    path = directory / BANK_FILE
    path.write_bytes(buffer.getvalue())

    save_trajectories(bank.trajectories, directory / BANK_TRAJECTORIES,
                      header="normalized trajectories of bank.trjb")

    manifest = {
        'format': 'trajlet-bank',
        'version': BANK_VERSION,
        'file': BANK_FILE,
        'trajectories': BANK_TRAJECTORIES,
        'count': len(bank),
        'metadata': bank.metadata,
        'transforms': {traj_id: _transform_values(nt.transform)
                       for traj_id, nt in zip(bank.ids, bank.trajectories)},
    }
    (directory / BANK_MANIFEST).write_text(
        safe_dump(manifest, sort_keys=True, default_flow_style=False),
        encoding='utf-8')

    logger.info(f"Wrote bank of {len(bank)} rows to {path}")
    return path

def load_bank(path: Union[str, Path]) -> EmbeddingBank:
    """
    Load a bank directory, or the directory holding the given bank file.

    Trajectories get back the transforms recorded in ``bank.yml``. A row
    with no recorded transform, as in banks written before transforms were
    kept, loads with the identity and stays in the canonical frame under
    :func:`~trajlet.core.denormalize`.
    """

    path = Path(path)
    directory = path if path.is_dir() else path.parent
    bank_file = directory / BANK_FILE if path.is_dir() else path

    metadata = {}
    transforms = {}
    manifest = directory / BANK_MANIFEST
    if manifest.is_file():
        data = load_yaml(manifest) or {}
        metadata = data.get('metadata') or {}
        transforms = data.get('transforms') or {}

    payload = directory / BANK_TRAJECTORIES
    trajectories = []
    if payload.is_file():
        trajectories = [
            NormalizedTrajectory(
                points=t.points, transform=_transform(transforms.get(t.id)),
                source_id=t.id, label=t.label)
            for t in load_trajectories(payload)]

    logger.debug(f"Loading bank {bank_file}")
    with open(bank_file, 'rb') as fd:
        return read_bank(fd, trajectories, metadata, filename=str(bank_file))


# The end.
