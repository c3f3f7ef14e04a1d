"""
trajlet.evaluation

Retrieval quality: minADE, minFDE, avgADE and avgFDE over the K
candidates retrieved for each query, aggregated into a
:class:`RetrievalReport`, and top-K label purity.

Metrics are computed between normalized trajectories, in the same
agent-centric frame the encoder sees. Any engine satisfying
:class:`SearchEngine` can be evaluated, learned or not.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import json
import logging
from typing import (
    List, Optional, Protocol, Sequence, TextIO, Union,
)

import numpy as np

from .checkpoint import Checkpoint
from .core import (
    NormalizedTrajectory, PointsLike, Trajectory, ade_to_many, as_points,
    stack_points,
)
from .exceptions import (
    EmptyCandidates, MissingLabels, QueryError, TrajletError,
)
from .models.compat import BaseModel, Field
from .models.enums import RotationAnchor
from .parallel import pmap
from .retrieval import (
    EmbeddingBank, IvfIndex, QueryResult, checkpoint_anchor, embed_query,
    normalize_all, search_exact, search_ivf,
)


__all__ = (
    'EmbeddingEngine',
    'QueryMetrics',
    'RetrievalReport',
    'SearchEngine',

    'avg_ade',
    'avg_fde',
    'cluster_purity',
    'evaluate_engine',
    'evaluate_retrieval',
    'min_ade',
    'min_fde',
    'write_report',
)


logger = logging.getLogger(__name__)


def _candidate_stack(query: PointsLike, candidates: Sequence[PointsLike]) -> np.ndarray:
    if not len(candidates):
        raise EmptyCandidates("no candidates to compare the query against")
    return stack_points(candidates)


def _final_distances(query: PointsLike, candidates: Sequence[PointsLike]) -> np.ndarray:
    stacked = _candidate_stack(query, candidates)
    diff = stacked[:, -1] - as_points(query)[-1]
    return np.hypot(diff[:, 0], diff[:, 1])


def _ades(query: PointsLike, candidates: Sequence[PointsLike]) -> np.ndarray:
    return ade_to_many(query, _candidate_stack(query, candidates))


def min_ade(query: PointsLike, candidates: Sequence[PointsLike]) -> float:
    """
    :raises EmptyCandidates: for an empty candidate list
    :raises LengthMismatch: if a candidate's length differs from the query's
    """

    return float(_ades(query, candidates).min())


def avg_ade(query: PointsLike, candidates: Sequence[PointsLike]) -> float:
    return float(_ades(query, candidates).mean())


def min_fde(query: PointsLike, candidates: Sequence[PointsLike]) -> float:
    return float(_final_distances(query, candidates).min())


def avg_fde(query: PointsLike, candidates: Sequence[PointsLike]) -> float:
    return float(_final_distances(query, candidates).mean())


class SearchEngine(Protocol):
    """
    Anything that can answer top-K queries over a fixed set of normalized
    trajectories. ``QueryResult.indices`` index ``trajectories``.
    """

    name: str
    anchor: RotationAnchor
    trajectories: Sequence[NormalizedTrajectory]

    def search(self, query: NormalizedTrajectory, k: int) -> QueryResult:
        ...

    def search_member(self, position: int, k: int) -> QueryResult:
        ...


class EmbeddingEngine:
    """
    Learned retrieval: embed the query with the checkpoint, then search the
    bank exactly, or through ``index`` probing ``nprobe`` lists.
    """

    def __init__(
            self,
            bank: EmbeddingBank,
            ckpt: Checkpoint,
            index: Optional[IvfIndex] = None,
            nprobe: int = 1):

        self.bank = bank
        self.ckpt = ckpt
        self.index = index
        self.nprobe = nprobe
        self.name = 'exact' if index is None else f'ivf-{index.nlist}-{nprobe}'
        self.anchor = checkpoint_anchor(ckpt)
        self.trajectories = bank.trajectories


    def _search_vector(self, vector: np.ndarray, k: int) -> QueryResult:
        if self.index is None:
            return search_exact(self.bank, vector, k)
        return search_ivf(self.index, self.bank, vector, k, self.nprobe)


    def search(self, query: NormalizedTrajectory, k: int) -> QueryResult:
        return self._search_vector(embed_query(self.ckpt, query), k)


    def search_member(self, position: int, k: int) -> QueryResult:
        return self._search_vector(self.bank.embeddings[position], k)


class QueryMetrics(BaseModel):
    query_id: str
    neighbors: List[str]
    min_ade: float
    min_fde: float
    avg_ade: float
    avg_fde: float
    purity: Optional[float] = None


class RetrievalReport(BaseModel):
    """
    Per-query rows and their means. ``purity`` is present when the queries
    carry labels.
    """

    engine: str
    k: int
    bank_size: int
    query_count: int
    min_ade: Optional[float] = None
    min_fde: Optional[float] = None
    avg_ade: Optional[float] = None
    avg_fde: Optional[float] = None
    purity: Optional[float] = None
    queries: List[QueryMetrics] = Field(default_factory=list)


    def to_json(self) -> str:
        return json.dumps(self.model_dump(), indent=2, sort_keys=True)


def _label_purity(label: Optional[str], candidates: Sequence[NormalizedTrajectory]) -> Optional[float]:
    if label is None or not candidates:
        return None
    return sum(c.label == label for c in candidates) / len(candidates)


def _evaluate_query(
        engine: SearchEngine,
        nt: NormalizedTrajectory,
        k: int) -> QueryMetrics:

    try:
        result = engine.search(nt, k)
        candidates = [engine.trajectories[i] for i in result.indices]
        ades = _ades(nt, candidates)
        fdes = _final_distances(nt, candidates)
    except TrajletError as e:
        raise QueryError(nt.source_id, e) from e

    return QueryMetrics(
        query_id=nt.source_id,
        neighbors=list(result.ids),
        min_ade=float(ades.min()),
        min_fde=float(fdes.min()),
        avg_ade=float(ades.mean()),
        avg_fde=float(fdes.mean()),
        purity=_label_purity(nt.label, candidates))


def evaluate_engine(
        engine: SearchEngine,
        queries: Sequence[Union[Trajectory, NormalizedTrajectory]],
        k: int = 6) -> RetrievalReport:
    """
    Retrieve ``k`` candidates for every query and score them.

    :raises EmptyCandidates: if the engine holds no trajectories
    :raises QueryError: naming the first query that fails
    """

    if not len(engine.trajectories):
        raise EmptyCandidates(f"the {engine.name} engine holds no trajectories")

    normalized = normalize_all(queries, engine.anchor)
    rows = pmap(lambda nt: _evaluate_query(engine, nt, k), normalized)

    report = RetrievalReport(
        engine=engine.name,
        k=k,
        bank_size=len(engine.trajectories),
        query_count=len(rows),
        queries=rows)

    if rows:
        for name in ('min_ade', 'min_fde', 'avg_ade', 'avg_fde'):
            setattr(report, name, float(np.mean([getattr(r, name) for r in rows])))

        purities = [r.purity for r in rows if r.purity is not None]
        if purities:
            report.purity = float(np.mean(purities))

    logger.info(f"{engine.name}: {len(rows)} queries, minADE={report.min_ade}"
                f" avgADE={report.avg_ade}")
    return report


def evaluate_retrieval(
        bank: EmbeddingBank,
        ckpt: Checkpoint,
        queries: Sequence[Union[Trajectory, NormalizedTrajectory]],
        k: int = 6,
        index: Optional[IvfIndex] = None,
        nprobe: int = 1) -> RetrievalReport:
    """
    Evaluate learned retrieval over ``bank``, exact by default or through
    an IVF ``index``.
    """

    return evaluate_engine(EmbeddingEngine(bank, ckpt, index, nprobe), queries, k)


def cluster_purity(engine: SearchEngine, k: int = 6) -> float:
    """
    The mean, over every trajectory the engine holds, of the fraction of its
    ``k`` nearest other trajectories sharing its label.

    :raises MissingLabels: if any trajectory is unlabelled
    :raises EmptyCandidates: if there are fewer than two trajectories
    """

    trajectories = engine.trajectories
    unlabelled = [i for i, nt in enumerate(trajectories) if nt.label is None]
    if unlabelled:
        raise MissingLabels(
            f"{len(unlabelled)} trajectories have no label",
            index=unlabelled[0])
    if len(trajectories) < 2:
        raise EmptyCandidates("purity needs at least two trajectories")

    def member_purity(position: int) -> float:
        result = engine.search_member(position, k + 1)
        others = [i for i in result.indices if i != position][:k]
        label = trajectories[position].label
        return sum(trajectories[i].label == label for i in others) / len(others)

    values = pmap(member_purity, range(len(trajectories)))
    return float(np.mean(values))


def write_report(report: RetrievalReport, out: Union[str, TextIO]) -> None:
    if isinstance(out, str):
        with open(out, 'w', encoding='utf-8') as fd:
            write_report(report, fd)
        return

    out.write(report.to_json())
    out.write('\n')


# The end.
