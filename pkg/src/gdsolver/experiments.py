"""Seeded experiment harness: the regression epoch sweep and the classification 2-loop grid.

Both experiments return :class:`MetricsRow` lists; :func:`write_csv` turns them
into the fixed CSV schema preceded by a ``# config`` manifest line.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, is_dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .data import Dataset, RegressionTask, Split, gen_blobs, gen_regression, load_mnist, split
from .driver import GdSolverConfig, evaluate, solver_sweep, train_gd, two_loop
from .errors import InvalidInputError
from .nn import Dnn, accuracy, init_dnn
from .optim import OPTIMIZER_NAMES, make_optimizer

CSV_HEADER = ("method", "phase", "epoch", "train_loss", "val_loss", "test_loss",
              "test_accuracy", "elapsed_ms")

REGRESSION_SIZES = (1, 16, 16, 1)
CLASSIFICATION_HIDDEN = 32
N_GRID = (250, 500, 1000, 2000)


@dataclass
class MetricsRow:
    method: str
    phase: str
    epoch: int
    train_loss: float
    val_loss: float
    test_loss: float
    test_accuracy: float
    elapsed_ms: float

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, k) for k in CSV_HEADER)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _jsonable(obj):
    if is_dataclass(obj):
        return {k: _jsonable(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def manifest_line(config: dict) -> str:
    return "# config " + json.dumps(_jsonable(config), sort_keys=True)


def render_csv(rows: list[MetricsRow], config: dict) -> str:
    buf = io.StringIO()
    buf.write(manifest_line(config) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([_fmt(v) for v in r.as_tuple()])
    return buf.getvalue()


def write_csv(path, rows: list[MetricsRow], config: dict) -> None:
    Path(path).write_text(render_csv(rows, config))


def read_csv(path) -> tuple[dict, list[dict]]:
    """Inverse of :func:`write_csv`: ``(manifest, rows as dicts)``."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# config "):
        raise InvalidInputError(f"{path} lacks a '# config' manifest line")
    manifest = json.loads(lines[0][len("# config "):])
    return manifest, list(csv.DictReader(lines[1:]))


# -- experiment 1 ------------------------------------------------------------

def regression_splits(task: RegressionTask, n_train: int, seed: int,
                      fractions=(0.7, 0.15, 0.15)) -> tuple[Dataset, Dataset, Dataset]:
    """Generate enough points that the training part has exactly ``n_train`` of them."""
    total = max(3, int(n_train / fractions[0]) - 1)
    while int(round(fractions[0] * total)) <= n_train:
        n_val = int(round(fractions[1] * total))
        if int(round(fractions[0] * total)) == n_train and n_val >= 1 and total - n_train - n_val >= 1:
            return split(gen_regression(task, total, seed), Split(fractions, seed))
        total += 1
    raise InvalidInputError(f"no dataset size gives {n_train} training points with split {fractions}")


@dataclass
class Experiment1Config:
    task: str = "identity"
    seed: int = 0
    epochs: int = 20
    n_train: int = 500
    optimizers: tuple[str, ...] = OPTIMIZER_NAMES
    sweep_optimizer: str = "sgd"
    sweep_epochs: tuple[int, ...] | None = None  # None: every epoch 1..epochs
    sweep_size: int | None = None
    batch_size: int = 32
    solver: GdSolverConfig = field(default_factory=GdSolverConfig)


def _gd_curve(dnn: Dnn, tr, va, te, name: str, epochs: int, batch_size: int, seed: int,
              keep: set[int]) -> tuple[list[MetricsRow], dict[int, tuple[Dnn, float]]]:
    """Continuous GD for ``epochs`` epochs; one row per epoch and checkpoints at ``keep``."""
    rows: list[MetricsRow] = []
    ckpt: dict[int, tuple[Dnn, float]] = {}
    clock = [0.0]

    def on_epoch(epoch, net, hist):
        clock[0] += hist.epoch_time[-1]
        rows.append(MetricsRow(name, "gd", epoch, hist.train[-1], hist.val[-1],
                               evaluate(net, te), math.nan, clock[0] * 1e3))
        if epoch in keep:
            ckpt[epoch] = (net.copy(), clock[0])

    train_gd(dnn, tr, va, make_optimizer(name), epochs, None, batch_size,
             np.random.default_rng(seed), on_epoch=on_epoch)
    return rows, ckpt


def experiment1(cfg: Experiment1Config) -> list[MetricsRow]:
    """Baselines trained continuously for ``cfg.epochs`` epochs, plus GDSolver rows.

    A GDSolver row at epoch ``e`` is the ``cfg.sweep_optimizer`` checkpoint at
    ``e`` followed by one regression sweep; its time is the GD time to ``e``
    plus the sweep's encode-and-solve time.
    """
    if cfg.epochs < 1:
        raise InvalidInputError("epochs must be >= 1")
    if cfg.sweep_optimizer not in cfg.optimizers:
        raise InvalidInputError("the sweep optimizer must be one of the baselines")
    tr, va, te = regression_splits(RegressionTask(cfg.task), cfg.n_train, cfg.seed)
    init = init_dnn(list(REGRESSION_SIZES), seed=cfg.seed)
    sweep_at = set(range(1, cfg.epochs + 1) if cfg.sweep_epochs is None else cfg.sweep_epochs)
    rows: list[MetricsRow] = []
    for name in cfg.optimizers:
        keep = sweep_at if name == cfg.sweep_optimizer else set()
        curve, ckpt = _gd_curve(init, tr, va, te, name, cfg.epochs, cfg.batch_size, cfg.seed, keep)
        rows.extend(curve)
        if name != cfg.sweep_optimizer:
            continue
        for e in sorted(ckpt):
            net, gd_time = ckpt[e]
            new, out = solver_sweep(net, tr, "regression", cfg.solver, cfg.sweep_size)
            rows.append(MetricsRow("gdsolver", "sweep", e, evaluate(new, tr), evaluate(new, va),
                                   evaluate(new, te), math.nan, (gd_time + out.elapsed) * 1e3))
    return rows


# -- experiment 2 ------------------------------------------------------------

@dataclass
class Experiment2Config:
    dataset: str = "blobs"  # "blobs" | "mnist"
    seed: int = 0
    epochs: int = 10
    n_grid: tuple[int, ...] = N_GRID
    optimizers: tuple[str, ...] = OPTIMIZER_NAMES
    loop_optimizer: str = "sgd"
    blob_classes: int = 3
    blob_dim: int = 2
    blob_separation: float = 10.0
    mnist_dir: str | None = None
    test_size: int = 1000
    batch_size: int = 32
    solver: GdSolverConfig = field(default_factory=GdSolverConfig)


def classification_pool(cfg: Experiment2Config) -> tuple[Dataset, Dataset, Dataset]:
    """Train pool of at least ``max(n_grid)`` points plus validation and test sets."""
    n_max = max(cfg.n_grid)
    if cfg.dataset == "mnist":
        if cfg.mnist_dir is None:
            raise InvalidInputError("the mnist dataset needs a directory of IDX files")
        full = load_mnist(cfg.mnist_dir, "train")
        test = load_mnist(cfg.mnist_dir, "test")
        perm = np.random.default_rng(cfg.seed).permutation(len(full))
        n_val = max(1, n_max // 4)
        if n_max + n_val > len(full):
            raise InvalidInputError(f"MNIST train has {len(full)} points; need {n_max + n_val}")
        tperm = np.random.default_rng(cfg.seed + 1).permutation(len(test))[:cfg.test_size]
        return full.subset(perm[:n_max]), full.subset(perm[n_max:n_max + n_val]), test.subset(tperm)
    if cfg.dataset != "blobs":
        raise InvalidInputError(f"unknown classification dataset {cfg.dataset!r}")
    total = int(math.ceil(n_max / 0.7)) + 1
    per_class = int(math.ceil(total / cfg.blob_classes))
    ds = gen_blobs(cfg.blob_classes, per_class, cfg.blob_dim, cfg.blob_separation, cfg.seed)
    return split(ds, Split(seed=cfg.seed))


def experiment2(cfg: Experiment2Config) -> list[MetricsRow]:
    """For each ``n``: baselines for ``cfg.epochs`` epochs and a 2-loop run with that budget.

    Methods are labelled ``<name>/n<n>``.  The ``epoch`` column holds the GD
    epochs actually used, so the 2-loop budget is visible in the output.
    """
    if cfg.epochs < 2:
        raise InvalidInputError("experiment 2 needs an epoch budget >= 2")
    pool, va, te = classification_pool(cfg)
    rows: list[MetricsRow] = []
    for n in cfg.n_grid:
        if n > len(pool):
            raise InvalidInputError(f"train pool has {len(pool)} points, grid asks for {n}")
        tr = pool.subset(np.arange(n))
        init = init_dnn([tr.X.shape[1], CLASSIFICATION_HIDDEN, pool.n_classes], seed=cfg.seed)
        for name in cfg.optimizers:
            net, hist = train_gd(init, tr, va, make_optimizer(name), cfg.epochs, None,
                                 cfg.batch_size, np.random.default_rng(cfg.seed))
            rows.append(MetricsRow(f"{name}/n{n}", "gd", len(hist.train), evaluate(net, tr),
                                   evaluate(net, va), evaluate(net, te), accuracy(net, te.X, te.Y),
                                   sum(hist.epoch_time) * 1e3))
        run = two_loop(init, tr, va, cfg.epochs, replace(cfg.solver, seed=cfg.seed),
                       cfg.loop_optimizer, te)
        net = run.final_dnn
        rows.append(MetricsRow(f"two_loop/n{n}", "sweep", run.gd_epochs, evaluate(net, tr),
                               evaluate(net, va), evaluate(net, te), accuracy(net, te.X, te.Y),
                               run.records[-1].elapsed * 1e3))
    return rows
