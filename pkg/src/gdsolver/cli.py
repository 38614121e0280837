"""``gdsolver`` command line: training runs, sweep diagnostics, LP export and the experiments.

Exit codes: 0 success, 2 invalid arguments, 3 I/O error, 4 numerical or solver abort.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .data import RegressionTask
from .driver import (GdSolverConfig, Record, gdsolver, select_misclassified,
                     select_regression_points, solver_sweep, train_gd, two_loop)
from .encoder import EncoderConfig, encode_classification, encode_regression
from .errors import (ConfigurationError, ConsistencyError, FormatError, InvalidInputError,
                     NumericalError)
from .experiments import (CLASSIFICATION_HIDDEN, N_GRID, REGRESSION_SIZES, Experiment1Config,
                          Experiment2Config, MetricsRow, classification_pool, experiment1,
                          experiment2, regression_splits, render_csv)
from .milp.bnb import SolverConfig
from .milp.model import write_lp
from .nn import accuracy, hidden_features, init_dnn, load_dnn, save_dnn
from .optim import OPTIMIZER_NAMES, make_optimizer

EXIT_OK, EXIT_ARGS, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4

REGRESSION_TASKS = ("identity", "affine", "poly4", "formula")
CLASSIFICATION_TASKS = ("blobs", "mnist")

log = logging.getLogger("gdsolver")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _grid(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(p) for p in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("grid values must be >= 1")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--task", choices=REGRESSION_TASKS + CLASSIFICATION_TASKS)
    common.add_argument("--optimizer", choices=OPTIMIZER_NAMES, default="sgd")
    common.add_argument("--epochs", type=_positive_int)
    common.add_argument("--train-size", type=_positive_int)
    common.add_argument("--radius", type=float, default=0.1)
    common.add_argument("--epsilon", type=float, default=1e-4)
    common.add_argument("--big-m", type=float)
    common.add_argument("--time-limit", type=float, default=30.0)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="CSV output path (default: stdout)")
    common.add_argument("--lp-out", help="LP file path for export-lp")
    common.add_argument("--mnist-dir")
    common.add_argument("--retry-on-infeasible", action="store_true")
    common.add_argument("--net", help="network snapshot (JSON) to start from")
    common.add_argument("--save-net", help="write the resulting network snapshot here")
    common.add_argument("--sweep-size", type=_positive_int,
                        help="regression sweeps encode this many worst-fit points (default: all)")
    common.add_argument("--n-grid", type=_grid, default=N_GRID, help="experiment2 sizes, e.g. 250,500")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="gdsolver", description="Hybrid GD + MILP final-layer training.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("regress", parents=[common], help="GDSolver on a synthetic regression task")
    sub.add_parser("classify", parents=[common], help="2-loop GDSolver on blobs or MNIST")
    sub.add_parser("sweep-only", parents=[common], help="one solver sweep on a (trained) network")
    sub.add_parser("export-lp", parents=[common], help="write the sweep MILP in LP format")
    sub.add_parser("experiment1", parents=[common], help="regression epoch sweep")
    sub.add_parser("experiment2", parents=[common], help="classification n-grid with the 2-loop")
    return p


def _config(args) -> GdSolverConfig:
    enc = EncoderConfig(radius=args.radius, eps=args.epsilon, big_m=args.big_m)
    if not args.time_limit > 0:
        raise InvalidInputError("--time-limit must be positive")
    return GdSolverConfig(encoder=enc, solver=SolverConfig(time_limit=args.time_limit),
                          retry_on_infeasible=args.retry_on_infeasible, seed=args.seed)


def _task(args, default: str) -> str:
    return args.task or default


def _is_classification(task: str) -> bool:
    return task in CLASSIFICATION_TASKS


def _datasets(args, task: str):
    if _is_classification(task):
        n = args.train_size or 250
        cfg = Experiment2Config(dataset=task, seed=args.seed, n_grid=(n,), mnist_dir=args.mnist_dir)
        pool, va, te = classification_pool(cfg)
        return pool.subset(np.arange(n)), va, te
    return regression_splits(RegressionTask(task), args.train_size or 500, args.seed)


def _network(args, train):
    if args.net:
        net = load_dnn(args.net)
        if net.n_in != train.X.shape[1]:
            raise InvalidInputError(f"snapshot expects {net.n_in} inputs, data has {train.X.shape[1]}")
        return net
    if train.is_classification:
        return init_dnn([train.X.shape[1], CLASSIFICATION_HIDDEN, train.n_classes], seed=args.seed)
    return init_dnn(list(REGRESSION_SIZES), seed=args.seed)


def _run_rows(method: str, records: list[Record]) -> list[MetricsRow]:
    return [MetricsRow(method, r.phase, r.epoch_or_iter, r.train_loss, r.val_loss, r.test_loss,
                       r.test_accuracy, r.elapsed * 1e3) for r in records]


def _emit(args, rows: list[MetricsRow], manifest: dict) -> None:
    text = render_csv(rows, manifest)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _manifest(args, **extra) -> dict:
    doc = {k: v for k, v in vars(args).items() if k != "verbose"}
    doc.update(extra)
    return doc


def cmd_regress(args) -> int:
    task = _task(args, "identity")
    if _is_classification(task):
        raise InvalidInputError("regress needs a regression task")
    tr, va, te = _datasets(args, task)
    cfg = _config(args)
    if args.epochs:
        cfg = replace(cfg, max_epochs_per_gd_phase=args.epochs)
    run = gdsolver(_network(args, tr), tr, va, cfg, args.optimizer, te, args.sweep_size)
    _emit(args, _run_rows("gdsolver", run.records), _manifest(args, task=task, config=cfg))
    if args.save_net:
        save_dnn(run.final_dnn, args.save_net)
    if run.aborted:
        print(f"aborted: {run.aborted}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_classify(args) -> int:
    task = _task(args, "blobs")
    if not _is_classification(task):
        raise InvalidInputError("classify needs --task blobs or mnist")
    tr, va, te = _datasets(args, task)
    cfg = _config(args)
    e = args.epochs or 10
    run = two_loop(_network(args, tr), tr, va, e, cfg, args.optimizer, te)
    _emit(args, _run_rows("two_loop", run.records), _manifest(args, task=task, epochs=e, config=cfg))
    if args.save_net:
        save_dnn(run.final_dnn, args.save_net)
    return EXIT_OK


def cmd_sweep_only(args) -> int:
    task = _task(args, "identity")
    tr, va, te = _datasets(args, task)
    cfg = _config(args)
    net = _network(args, tr)
    if args.epochs:
        net, _ = train_gd(net, tr, va, make_optimizer(args.optimizer), args.epochs,
                          batch_size=cfg.batch_size, rng=np.random.default_rng(args.seed))
    kind = "classification" if tr.is_classification else "regression"
    new, out = solver_sweep(net, tr, kind, cfg, args.sweep_size)
    msg = (f"sweep: {out.kind.value}{' (' + out.reason + ')' if out.reason else ''}; "
           f"encoded {out.encoded.size} points; metric {out.before:.6g} -> {out.after:.6g}; "
           f"solver {out.solver_status or '-'}; nodes {out.nodes}; {out.elapsed * 1e3:.1f} ms")
    print(msg)
    if tr.is_classification:
        print(f"test accuracy {accuracy(net, te.X, te.Y):.4f} -> {accuracy(new, te.X, te.Y):.4f}")
    if args.save_net:
        save_dnn(new, args.save_net)
    return EXIT_OK


def cmd_export_lp(args) -> int:
    if not args.lp_out:
        raise InvalidInputError("export-lp needs --lp-out")
    task = _task(args, "identity")
    tr, _, _ = _datasets(args, task)
    cfg = _config(args)
    net = _network(args, tr)
    if tr.is_classification:
        idx = select_misclassified(net, tr, cfg.sweep_batch)
        if idx.size == 0:
            idx = np.arange(min(cfg.sweep_batch, len(tr)))
        H = hidden_features(net, tr.X[idx])
        enc = encode_classification(net.final, H, tr.Y[idx], None, cfg.encoder)
    else:
        idx = select_regression_points(net, tr, args.sweep_size, cfg.encoder.eps)
        if idx.size == 0:
            idx = np.arange(len(tr))
        H = hidden_features(net, tr.X[idx])
        enc = encode_regression(net.final, H, tr.Y[idx], None, cfg.encoder)
    Path(args.lp_out).write_text(write_lp(enc.model))
    m = enc.model
    print(f"wrote {args.lp_out}: {m.n_vars} variables ({len(m.binary_ids())} binary), "
          f"{m.n_constraints} constraints, {idx.size} datapoints")
    return EXIT_OK


def cmd_experiment1(args) -> int:
    task = _task(args, "identity")
    if _is_classification(task):
        raise InvalidInputError("experiment1 runs on regression tasks")
    cfg = Experiment1Config(task=task, seed=args.seed, epochs=args.epochs or 20,
                            n_train=args.train_size or 500, sweep_optimizer=args.optimizer,
                            sweep_size=args.sweep_size, solver=_config(args))
    _emit(args, experiment1(cfg), _manifest(args, experiment=cfg))
    return EXIT_OK


def cmd_experiment2(args) -> int:
    task = _task(args, "blobs")
    if not _is_classification(task):
        raise InvalidInputError("experiment2 runs on blobs or mnist")
    cfg = Experiment2Config(dataset=task, seed=args.seed, epochs=args.epochs or 10,
                            n_grid=args.n_grid, loop_optimizer=args.optimizer,
                            mnist_dir=args.mnist_dir, solver=_config(args))
    _emit(args, experiment2(cfg), _manifest(args, experiment=cfg))
    return EXIT_OK


COMMANDS = {
    "regress": cmd_regress,
    "classify": cmd_classify,
    "sweep-only": cmd_sweep_only,
    "export-lp": cmd_export_lp,
    "experiment1": cmd_experiment1,
    "experiment2": cmd_experiment2,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad arguments, 0 on --help
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (InvalidInputError, ConfigurationError) as exc:
        print(f"gdsolver: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (OSError, FormatError) as exc:
        print(f"gdsolver: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalError, ConsistencyError, ArithmeticError) as exc:
        print(f"gdsolver: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
