"""Training loops: gradient-descent phases, solver sweeps, GDSolver and the 2-loop protocol."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .data import Dataset
from .encoder import (EncoderConfig, apply_solution, encode_classification,
                      encode_regression)
from .errors import ConsistencyError, InvalidInputError, NumericalError
from .milp.bnb import MilpStatus, SolverConfig, solve_milp
from .nn import Dnn, LossKind, accuracy, backward, batch_loss, forward, hidden_features
from .optim import Optimizer, PlateauDetector, make_optimizer, plateau

log = logging.getLogger(__name__)


class Task(str, Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


@dataclass(frozen=True)
class GdSolverConfig:
    desired_loss: float = 0.0
    max_iter: int = 3
    plateau: PlateauDetector = field(default_factory=PlateauDetector)
    sweep_batch: int = 32
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    max_epochs_per_gd_phase: int = 50
    batch_size: int = 32
    retry_on_infeasible: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.max_iter < 1:
            raise InvalidInputError("max_iter must be >= 1")
        if self.sweep_batch < 1:
            raise InvalidInputError("sweep_batch must be >= 1")
        if self.max_epochs_per_gd_phase < 0:
            raise InvalidInputError("max_epochs_per_gd_phase must be >= 0")


class SweepKind(str, Enum):
    IMPROVED = "improved"
    NO_IMPROVEMENT = "no_improvement"
    SKIPPED = "skipped"


@dataclass
class SweepOutcome:
    kind: SweepKind
    reason: str = ""
    encoded: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    before: float = math.nan  # L1 on encoded points (regression) / correct count (classification)
    after: float = math.nan
    solver_status: str = ""
    nodes: int = 0
    elapsed: float = 0.0

    @property
    def improved(self) -> bool:
        return self.kind is SweepKind.IMPROVED


@dataclass
class Record:
    phase: str  # "gd" | "sweep"
    epoch_or_iter: int
    train_loss: float
    val_loss: float
    test_loss: float
    elapsed: float
    test_accuracy: float = math.nan
    note: str = ""


@dataclass
class TrainingRun:
    records: list[Record] = field(default_factory=list)
    final_dnn: Dnn | None = None
    sweeps: list[SweepOutcome] = field(default_factory=list)
    gd_epochs: int = 0
    aborted: str = ""


def task_of(ds: Dataset) -> Task:
    return Task.CLASSIFICATION if ds.is_classification else Task.REGRESSION


def loss_kind(task: Task) -> LossKind:
    return LossKind.SOFTMAX_CE if task is Task.CLASSIFICATION else LossKind.MSE


def evaluate(dnn: Dnn, ds: Dataset | None) -> float:
    if ds is None or len(ds) == 0:
        return math.nan
    return batch_loss(dnn, ds.X, ds.Y, loss_kind(task_of(ds)))


def _accuracy(dnn: Dnn, ds: Dataset | None) -> float:
    if ds is None or not ds.is_classification or len(ds) == 0:
        return math.nan
    return accuracy(dnn, ds.X, ds.Y)


@dataclass
class GdHistory:
    train: list[float] = field(default_factory=list)
    val: list[float] = field(default_factory=list)
    epoch_time: list[float] = field(default_factory=list)  # training time only
    plateaued: bool = False


def train_gd(dnn: Dnn, train: Dataset, val: Dataset | None, optimizer: Optimizer,
             max_epochs: int, det: PlateauDetector | None = None, batch_size: int = 32,
             rng: np.random.Generator | None = None, epoch_offset: int = 0,
             on_epoch=None) -> tuple[Dnn, GdHistory]:
    """Mini-batch gradient descent until the validation loss plateaus or the budget runs out.

    ``epoch_offset`` feeds the learning-rate schedule when training resumes.
    ``on_epoch(epoch, dnn, hist)`` runs after each epoch, outside the timed part.
    """
    dnn = dnn.copy()
    hist = GdHistory()
    if max_epochs <= 0 or len(train) == 0:
        return dnn, hist
    rng = rng if rng is not None else np.random.default_rng(0)
    kind = loss_kind(task_of(train))
    for epoch in range(max_epochs):
        t0 = time.perf_counter()
        perm = rng.permutation(len(train))
        for start in range(0, len(train), batch_size):
            idx = perm[start:start + batch_size]
            grads = backward(dnn, train.X[idx], train.Y[idx], kind)
            dnn.set_params(optimizer.step(dnn.params(), grads, epoch_offset + epoch))
        hist.epoch_time.append(time.perf_counter() - t0)
        tr = batch_loss(dnn, train.X, train.Y, kind)
        va = batch_loss(dnn, val.X, val.Y, kind) if val is not None and len(val) else tr
        if not (math.isfinite(tr) and math.isfinite(va)):
            raise NumericalError(f"non-finite loss after GD epoch {epoch_offset + epoch + 1}")
        hist.train.append(tr)
        hist.val.append(va)
        if on_epoch is not None:
            on_epoch(epoch + 1, dnn, hist)
        if det is not None and plateau(hist.val, det):
            hist.plateaued = True
            break
    return dnn, hist


def select_misclassified(dnn: Dnn, data: Dataset, k: int) -> np.ndarray:
    """First ``k`` indices, in dataset order, whose predicted class is wrong."""
    if len(data) == 0:
        return np.zeros(0, dtype=np.int64)
    pred = np.argmax(forward(dnn, data.X), axis=1)
    return np.flatnonzero(pred != data.Y)[:k].astype(np.int64)


def select_regression_points(dnn: Dnn, data: Dataset, k: int | None, eps: float) -> np.ndarray:
    """Points a regression sweep encodes: the ``k`` worst-fit points, or all when ``k`` is None.

    Returns an empty array when every point is already within ``eps`` of its
    target, since there is then nothing to improve.
    """
    err = np.abs(forward(dnn, data.X) - data.Y)
    worst = err.max(axis=1)
    candidates = np.flatnonzero(worst > eps)
    if candidates.size == 0:
        return candidates.astype(np.int64)
    if k is None:
        return np.arange(len(data), dtype=np.int64)
    if k >= candidates.size:
        return candidates.astype(np.int64)
    order = np.argsort(-worst[candidates], kind="stable")[:k]
    return np.sort(candidates[order]).astype(np.int64)


def _l1(dnn: Dnn, X, Y) -> float:
    return float(np.sum(np.abs(forward(dnn, X) - Y)))


def solver_sweep(dnn: Dnn, data: Dataset, task: Task | str, cfg: GdSolverConfig,
                 sweep_size: int | None = None) -> tuple[Dnn, SweepOutcome]:
    """Fine-tune the final layer with one MILP solve.

    Classification encodes the first ``cfg.sweep_batch`` misclassified points.
    Regression encodes ``sweep_size`` worst-fit points (all points when None).
    On success the improvement is re-checked by evaluating the updated network.
    """
    task = Task(task)
    t0 = time.perf_counter()
    H_all = None
    if task is Task.CLASSIFICATION:
        idx = select_misclassified(dnn, data, cfg.sweep_batch)
        if idx.size == 0:
            return dnn, SweepOutcome(SweepKind.SKIPPED, "nothing-to-encode", idx,
                                     elapsed=time.perf_counter() - t0)
        H_all = hidden_features(dnn, data.X[idx])
        labels = data.Y[idx]
        current = int(np.sum(np.argmax(dnn.final.apply(H_all), axis=1) == labels))
        enc = encode_classification(dnn.final, H_all, labels, current, cfg.encoder)
        before = float(current)
    else:
        idx = select_regression_points(dnn, data, sweep_size, cfg.encoder.eps)
        if idx.size == 0:
            return dnn, SweepOutcome(SweepKind.SKIPPED, "nothing-to-encode", idx,
                                     elapsed=time.perf_counter() - t0)
        H_all = hidden_features(dnn, data.X[idx])
        Y = data.Y[idx]
        enc = encode_regression(dnn.final, H_all, Y, dnn.final.apply(H_all), cfg.encoder)
        before = _l1(dnn, data.X[idx], Y)

    res = solve_milp(enc.model, cfg.solver)
    elapsed = time.perf_counter() - t0
    if not res.has_incumbent:
        reason = "time-limit" if res.status is MilpStatus.TIME_LIMIT_NO_INCUMBENT else "infeasible"
        return dnn, SweepOutcome(SweepKind.NO_IMPROVEMENT, reason, idx, before, before,
                                 res.status.value, res.nodes_explored, elapsed)

    new = apply_solution(dnn, enc, res.values)
    if task is Task.CLASSIFICATION:
        after = float(np.sum(np.argmax(forward(new, data.X[idx]), axis=1) == data.Y[idx]))
        ok = after >= before + 1
    else:
        after = _l1(new, data.X[idx], data.Y[idx])
        ok = after < before
    if not ok:
        raise ConsistencyError(
            f"{task.value} sweep reported a solution but the metric went {before} -> {after}")
    elapsed = time.perf_counter() - t0
    return new, SweepOutcome(SweepKind.IMPROVED, "", idx, before, after, res.status.value,
                             res.nodes_explored, elapsed)


def _record(run: TrainingRun, phase: str, k: int, dnn: Dnn, train, val, test, clock: float,
            note: str = "") -> None:
    run.records.append(Record(phase, k, evaluate(dnn, train), evaluate(dnn, val),
                              evaluate(dnn, test), clock, _accuracy(dnn, test), note))


def gdsolver(dnn: Dnn, train: Dataset, val: Dataset, cfg: GdSolverConfig,
             optimizer: Optimizer | str = "sgd", test: Dataset | None = None,
             sweep_size: int | None = None) -> TrainingRun:
    """Alternate GD-to-plateau with final-layer solver sweeps.

    Stops when the validation loss reaches ``cfg.desired_loss``, after
    ``cfg.max_iter`` sweeps, or when a sweep finds no improvement (unless
    ``cfg.retry_on_infeasible``).  The run keeps its partial history if a
    phase aborts numerically.
    """
    if isinstance(optimizer, str):
        optimizer = make_optimizer(optimizer)
    task = task_of(train)
    rng = np.random.default_rng(cfg.seed)
    run = TrainingRun(final_dnn=dnn)
    clock = 0.0
    i = 0
    while True:
        try:
            dnn, hist = train_gd(dnn, train, val, optimizer, cfg.max_epochs_per_gd_phase, cfg.plateau,
                                 cfg.batch_size, rng, epoch_offset=run.gd_epochs)
        except NumericalError as exc:
            run.aborted = str(exc)
            log.error("GD phase aborted: %s", exc)
            break
        for e, (tr, va, dt) in enumerate(zip(hist.train, hist.val, hist.epoch_time)):
            clock += dt
            run.records.append(Record("gd", run.gd_epochs + e + 1, tr, va,
                                      evaluate(dnn, test) if e == len(hist.train) - 1 else math.nan,
                                      clock))
        run.gd_epochs += len(hist.train)
        run.final_dnn = dnn

        dnn, outcome = solver_sweep(dnn, train, task, cfg, sweep_size)
        i += 1
        clock += outcome.elapsed
        run.sweeps.append(outcome)
        run.final_dnn = dnn
        _record(run, "sweep", i, dnn, train, val, test, clock, outcome.kind.value)
        log.info("sweep %d: %s %s (%s -> %s)", i, outcome.kind.value, outcome.reason,
                 outcome.before, outcome.after)

        val_loss = evaluate(dnn, val)
        if not outcome.improved and not cfg.retry_on_infeasible:
            break
        if not val_loss > cfg.desired_loss or i >= cfg.max_iter:
            break
    return run


def two_loop(dnn: Dnn, train: Dataset, val: Dataset, e: int, cfg: GdSolverConfig,
             optimizer: Optimizer | str = "sgd", test: Dataset | None = None) -> TrainingRun:
    """Two rounds of (at most ceil(e/2) GD epochs, then a misclassified-batch sweep).

    GD stops early on a validation plateau.  The total number of GD epochs
    never exceeds ``e``.
    """
    if e < 2:
        raise InvalidInputError("the 2-loop protocol needs an epoch budget e >= 2")
    if isinstance(optimizer, str):
        optimizer = make_optimizer(optimizer)
    task = task_of(train)
    rng = np.random.default_rng(cfg.seed)
    run = TrainingRun(final_dnn=dnn)
    clock = 0.0
    per_round = math.ceil(e / 2)
    for round_no in (1, 2):
        budget = min(per_round, e - run.gd_epochs)
        dnn, hist = train_gd(dnn, train, val, optimizer, budget, cfg.plateau, cfg.batch_size, rng,
                             epoch_offset=run.gd_epochs)
        for k, (tr, va, dt) in enumerate(zip(hist.train, hist.val, hist.epoch_time)):
            clock += dt
            run.records.append(Record("gd", run.gd_epochs + k + 1, tr, va, math.nan, clock))
        run.gd_epochs += len(hist.train)
        if run.gd_epochs > e:
            raise ConsistencyError(f"2-loop used {run.gd_epochs} GD epochs with budget {e}")
        dnn, outcome = solver_sweep(dnn, train, task, cfg)
        clock += outcome.elapsed
        run.sweeps.append(outcome)
        _record(run, "sweep", round_no, dnn, train, val, test, clock, outcome.kind.value)
    run.final_dnn = dnn
    return run


def with_encoder(cfg: GdSolverConfig, **changes) -> GdSolverConfig:
    return replace(cfg, encoder=replace(cfg.encoder, **changes))
