"""
trajlet.workflow

The train, embed and evaluate pipeline as one pauseable workflow, and the
sweep that runs it once per grid point.

The workflow moves through its phases by explicit state transitions. Each
transition invokes the overridable `workflow_state_change` callback, which
may return True to pause the workflow; `resume` picks it up again.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import csv
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import (
    Callable, Iterator, List, Optional, Sequence, TextIO, Tuple, Union,
)

from .checkpoint import Checkpoint
from .core import NormalizedTrajectory, Trajectory
from .evaluation import EmbeddingEngine, RetrievalReport, evaluate_engine, write_report
from .exceptions import TrajletError
from .loader import load_trajectories
from .models import (
    EncoderConfig, Metric, RotationAnchor, SweepPoint, SweepSpec, TrainConfig,
    replace_model,
)
from .retrieval import EmbeddingBank, build_bank, build_ivf, normalize_all, save_bank
from .rng import generator
from .training import StepRecord, Trainer, TrainSummary


__all__ = (
    'SWEEP_COLUMNS',
    'SweepRow',
    'TrainEvalWorkflow',
    'WorkflowState',
    'WorkflowStateError',

    'holdout_split',
    'run_sweep',
    'write_sweep_csv',
)


logger = logging.getLogger(__name__)


class WorkflowState(Enum):
    """
    The states of the workflow, in the order a successful run visits them.
    """

    READY = "ready"
    STARTING = "starting"
    LOADING = "loading"
    LOADED = "loaded"
    TRAINING = "training"
    TRAINED = "trained"
    EMBEDDING = "embedding"
    EMBEDDED = "embedded"
    EVALUATING = "evaluating"
    EVALUATED = "evaluated"
    COMPLETED = "completed"
    FAILED = "failed"


class WorkflowStateError(Exception):
    """
    Exception raised when the workflow is in an invalid state.
    """
    pass


TrajectoryLike = Union[Trajectory, NormalizedTrajectory]


def holdout_split(
        trajectories: Sequence[TrajectoryLike],
        fraction: float,
        seed: int) -> Tuple[List[TrajectoryLike], List[TrajectoryLike]]:
    """
    Split off a seeded ``fraction`` of ``trajectories`` (at least one) as
    queries. Both parts keep the input order. Returns (bank, queries).
    """

    count = len(trajectories)
    if count < 2:
        raise ValueError("a holdout split needs at least two trajectories")

    held = min(count - 1, max(1, round(fraction * count)))
    chosen = set(generator(seed, 'data', count).permutation(count)[:held].tolist())

    bank = [t for i, t in enumerate(trajectories) if i not in chosen]
    queries = [t for i, t in enumerate(trajectories) if i in chosen]
    return bank, queries


@dataclass
class TrainEvalWorkflow:
    """
    Train an encoder on ``data``, embed ``data`` into a bank, and evaluate
    retrieval for ``queries``. Either may be given as paths, or directly as
    trajectories through ``trajectories`` and ``query_trajectories``. With
    no queries at all, a ``holdout`` fraction of the data becomes the query
    set and is kept out of training and the bank.

    With ``out_dir`` set the checkpoint, training log, bank and report are
    written there.
    """

    train_config: TrainConfig
    encoder_config: EncoderConfig

    data: List[Union[str, Path]] = field(default_factory=list)
    queries: List[Union[str, Path]] = field(default_factory=list)
    trajectories: Optional[Sequence[TrajectoryLike]] = None
    query_trajectories: Optional[Sequence[TrajectoryLike]] = None

    k: int = 6
    holdout: float = 0.1
    recursive: bool = False
    nlist: Optional[int] = None
    nprobe: int = 1
    out_dir: Optional[Union[str, Path]] = None

    pool: List[NormalizedTrajectory] = field(init=False, default=None)
    query_set: List[NormalizedTrajectory] = field(init=False, default=None)
    summary: TrainSummary = field(init=False, default=None)
    checkpoint: Checkpoint = field(init=False, default=None)
    bank: EmbeddingBank = field(init=False, default=None)
    report: RetrievalReport = field(init=False, default=None)

    state: WorkflowState = field(init=False, default=WorkflowState.READY)
    _iter_workflow: Iterator[bool] = field(init=False, default=None)


    @property
    def anchor(self) -> RotationAnchor:
        return RotationAnchor(self.train_config.anchor)


    def load_trajectories(self, paths: List[Union[str, Path]]) -> List[Trajectory]:
        return load_trajectories(paths, recursive=self.recursive)


    def state_change(
            self,
            from_state: WorkflowState,
            to_state: WorkflowState):

        if self.state != from_state:
            msg = (f"Workflow state ({from_state})"
                   f" not as expected: {self.state}")
            raise WorkflowStateError(msg)

        self.state = to_state
        return self.workflow_state_change(from_state, to_state)


    def run_loading(self):
        yield self.state_change(WorkflowState.STARTING,
                                WorkflowState.LOADING)

        data = self.trajectories
        if data is None:
            data = self.load_trajectories(self.data)

        queries = self.query_trajectories
        if queries is None and self.queries:
            queries = self.load_trajectories(self.queries)
        if queries is None:
            data, queries = holdout_split(data, self.holdout,
                                          self.train_config.seed)

        self.pool = normalize_all(data, self.anchor)
        self.query_set = normalize_all(queries, self.anchor)
        logger.info(f"Loaded {len(self.pool)} trajectories and"
                    f" {len(self.query_set)} queries")

        yield self.state_change(WorkflowState.LOADING,
                                WorkflowState.LOADED)


    def run_training(self):
        yield self.state_change(WorkflowState.LOADED,
                                WorkflowState.TRAINING)

        log_fd: Optional[TextIO] = None
        if self.out_dir:
            Path(self.out_dir).mkdir(parents=True, exist_ok=True)
            log_fd = open(Path(self.out_dir) / 'train.log', 'w', encoding='utf-8')

        try:
            trainer = Trainer(self.pool, self.train_config, self.encoder_config,
                              out_dir=self.out_dir, log=log_fd)
            self.summary = trainer.run(self.trainer_step_callback)
        finally:
            if log_fd is not None:
                log_fd.close()

        self.checkpoint = self.summary.checkpoint
        yield self.state_change(WorkflowState.TRAINING,
                                WorkflowState.TRAINED)


    def run_embedding(self):
        yield self.state_change(WorkflowState.TRAINED,
                                WorkflowState.EMBEDDING)

        self.bank = build_bank(self.pool, self.checkpoint)
        if self.out_dir:
            save_bank(self.bank, Path(self.out_dir) / 'bank')

        yield self.state_change(WorkflowState.EMBEDDING,
                                WorkflowState.EMBEDDED)


    def run_evaluating(self):
        yield self.state_change(WorkflowState.EMBEDDED,
                                WorkflowState.EVALUATING)

        index = None
        if self.nlist:
            index = build_ivf(self.bank, self.nlist, self.train_config.seed)

        engine = EmbeddingEngine(self.bank, self.checkpoint, index, self.nprobe)
        self.report = evaluate_engine(engine, self.query_set, self.k)
        if self.out_dir:
            write_report(self.report, str(Path(self.out_dir) / 'report.json'))

        yield self.state_change(WorkflowState.EVALUATING,
                                WorkflowState.EVALUATED)


    def iter_run(self):
        yield self.state_change(WorkflowState.READY,
                                WorkflowState.STARTING)
        yield from self.run_loading()
        yield from self.run_training()
        yield from self.run_embedding()
        yield from self.run_evaluating()
        yield self.state_change(WorkflowState.EVALUATED,
                                WorkflowState.COMPLETED)


    def run(self) -> WorkflowState:
        """
        Run the workflow from the READY state. Returns the state it stopped
        in: COMPLETED, or the current state if the callback paused it.

        If an exception is raised the state becomes FAILED and the exception
        is re-raised.
        """

        if self.state != WorkflowState.READY:
            msg = (f"Workflow state ({self.state})"
                   f" not as expected: {WorkflowState.READY}")
            raise WorkflowStateError(msg)

        self._iter_workflow = self.iter_run()
        return self._drive()


    def resume(self) -> WorkflowState:
        if self.state in (WorkflowState.READY, WorkflowState.COMPLETED,
                          WorkflowState.FAILED):
            msg = f"Cannot resume workflow from state: {self.state}"
            raise WorkflowStateError(msg)

        if self._iter_workflow is None:
            msg = (f"Workflow is missing its internal iterator,"
                   f" despite the state: {self.state}")
            raise WorkflowStateError(msg)

        return self._drive()


    def _drive(self) -> WorkflowState:
        try:
            for phase_result in self._iter_workflow:
                if phase_result is True:
                    self.workflow_paused()
                    return self.state

        except Exception:
            self._iter_workflow = None
            self.state = WorkflowState.FAILED
            raise

        self._iter_workflow = None
        return self.state


    def workflow_state_change(
            self,
            from_state: WorkflowState,
            to_state: WorkflowState) -> bool:
        """
        Invoked on every transition. Return True to pause.
        """

        return False


    def workflow_paused(self):
        pass


    def trainer_step_callback(self, step: int, record: StepRecord):
        pass


SWEEP_COLUMNS = (
    'metric', 'heads', 'layers', 'd_emb', 'input_dropout', 'attn_dropout',
    'avg_ade', 'min_ade', 'avg_fde', 'min_fde', 'purity', 'status',
)


@dataclass
class SweepRow:
    point: SweepPoint
    report: Optional[RetrievalReport] = None
    status: str = "ok"


    def values(self) -> List[str]:
        metric, heads, layers, d_emb, ip, ap = self.point
        row = [Metric(metric).value, heads, layers, d_emb, ip, ap]

        for name in ('avg_ade', 'min_ade', 'avg_fde', 'min_fde', 'purity'):
            value = getattr(self.report, name, None) if self.report else None
            row.append(value)

        row.append(self.status)
        return ["" if v is None else str(v) for v in row]


def _point_name(point: SweepPoint) -> str:
    metric, heads, layers, d_emb, ip, ap = point
    return f"{Metric(metric).value}-{heads}H{layers}L-e{d_emb}-ip{ip}-ap{ap}"


def run_sweep(
        spec: SweepSpec,
        trajectories: Optional[Sequence[TrajectoryLike]] = None,
        query_trajectories: Optional[Sequence[TrajectoryLike]] = None,
        point_callback: Optional[Callable[[SweepRow], None]] = None) -> List[SweepRow]:
    """
    Train and evaluate every point of ``spec``. A point that fails is
    logged and recorded with its error category as the status, and the
    sweep moves on. The CSV is written to ``spec.out``.
    """

    if trajectories is None:
        trajectories = load_trajectories(spec.data)
    if query_trajectories is None and spec.queries:
        query_trajectories = load_trajectories(spec.queries)

    out = Path(spec.out)
    rows: List[SweepRow] = []

    for point in spec.points():
        metric, heads, layers, d_emb, ip, ap = point
        row = SweepRow(point)

        try:
            encoder = replace_model(
                spec.encoder, num_heads=heads, num_layers=layers, d_emb=d_emb,
                input_dropout_p=ip, attn_dropout_p=ap)
            train = replace_model(
                spec.train, metric=metric.value,
                input_dropout_p=None, attn_dropout_p=None)

            workflow = TrainEvalWorkflow(
                train_config=train,
                encoder_config=encoder,
                trajectories=trajectories,
                query_trajectories=query_trajectories,
                k=spec.k,
                holdout=spec.holdout,
                out_dir=out / _point_name(point))
            workflow.run()
            row.report = workflow.report

        except TrajletError as e:
            logger.warning(f"Sweep point {_point_name(point)} failed: {e}")
            row.status = e.category

        except ValueError as e:
            logger.warning(f"Sweep point {_point_name(point)} failed: {e}")
            row.status = 'invalid'

        rows.append(row)
        if point_callback:
            point_callback(row)

    write_sweep_csv(rows, out / 'sweep.csv')
    return rows


def write_sweep_csv(rows: Sequence[SweepRow], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with open(path, 'w', encoding='utf-8', newline='') as fd:
        writer = csv.writer(fd, lineterminator='\n')
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow(row.values())

    logger.info(f"Wrote {len(rows)} sweep rows to {path}")
    return path


# The end.
