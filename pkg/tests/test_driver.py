import math
import os
from dataclasses import replace

import numpy as np
import pytest

from gdsolver.data import Dataset, RegressionTask, Split, gen_blobs, split
from gdsolver.driver import (GdSolverConfig, SweepKind, evaluate, gdsolver, select_misclassified,
                             select_regression_points, solver_sweep, train_gd, two_loop,
                             with_encoder)
from gdsolver.errors import InvalidInputError
from gdsolver.experiments import REGRESSION_SIZES, regression_splits
from gdsolver.nn import Dnn, Layer, forward, init_dnn
from gdsolver.optim import PlateauDetector, make_optimizer


def _params_equal(a: Dnn, b: Dnn) -> bool:
    return all(np.array_equal(p, q) for p, q in zip(a.params(), b.params()))


def _l1(net, ds, idx):
    return float(np.sum(np.abs(forward(net, ds.X[idx]) - ds.Y[idx])))


def _blobs(sep, seed, per_class=60):
    return split(gen_blobs(3, per_class, 2, sep, seed), Split(seed=seed))


def _fixed_classifier(labels_out: np.ndarray) -> Dnn:
    """Network whose prediction is decided by the sign of x: class 0 if x<0, else class 1."""
    hidden = Layer(np.array([[1.0], [-1.0]]), np.zeros(2), "relu")
    out = Layer(labels_out, np.zeros(2), "identity")
    return Dnn([hidden, out])


# -- train_gd -----------------------------------------------------------------

def test_train_gd_zero_budget_leaves_network():
    tr, va, _ = regression_splits(RegressionTask("affine"), 50, 0)
    net = init_dnn(list(REGRESSION_SIZES), seed=0)
    out, hist = train_gd(net, tr, va, make_optimizer("sgd"), 0)
    assert _params_equal(out, net)
    assert hist.train == [] and hist.val == []


def test_constant_target_plateaus_at_window():
    X = np.linspace(-1, 1, 40)[:, None]
    ds = Dataset(X, np.zeros((40, 1)), "regression")
    net = init_dnn([1, 8, 1], seed=1)
    net.final.weights[:] = 0.0
    det = PlateauDetector(window=3)
    _, hist = train_gd(net, ds, ds, make_optimizer("sgd"), 20, det)
    assert hist.plateaued
    assert len(hist.train) == det.window
    assert hist.val == [0.0] * det.window


def test_affine_sgd_loss_decreases_first_epochs():
    tr, va, _ = regression_splits(RegressionTask("affine"), 500, 0)
    _, hist = train_gd(init_dnn(list(REGRESSION_SIZES), seed=0), tr, va, make_optimizer("sgd"),
                       10, rng=np.random.default_rng(0))
    assert len(hist.train) == 10
    assert hist.train[0] > hist.train[1] > hist.train[2]


def test_train_gd_does_not_mutate_input():
    tr, va, _ = regression_splits(RegressionTask("identity"), 50, 0)
    net = init_dnn(list(REGRESSION_SIZES), seed=0)
    before = net.copy()
    train_gd(net, tr, va, make_optimizer("adam"), 2)
    assert _params_equal(net, before)


# -- select_misclassified -----------------------------------------------------

def test_select_misclassified_examples():
    X = np.linspace(-1, 1, 100)[:, None]
    truth = (X[:, 0] >= 0).astype(int)
    right = _fixed_classifier(np.array([[0.0, 1.0], [1.0, 0.0]]))
    wrong = _fixed_classifier(np.array([[1.0, 0.0], [0.0, 1.0]]))
    ds = Dataset(X, truth, "classification", 2)
    assert select_misclassified(right, ds, 32).size == 0
    np.testing.assert_array_equal(select_misclassified(wrong, ds, 32), np.arange(32))
    labels = truth.copy()
    flipped = np.arange(5, 95, 9)
    labels[flipped] = 1 - labels[flipped]
    ten = Dataset(X, labels, "classification", 2)
    np.testing.assert_array_equal(select_misclassified(right, ten, 32), flipped)


def test_select_regression_points():
    X = np.arange(6, dtype=float)[:, None]
    net = Dnn([Layer([[0.0]], [0.0], "identity")])
    Y = np.array([0.0, 5.0, 0.0, -3.0, 1e-6, 2.0])[:, None]
    ds = Dataset(X, Y, "regression")
    np.testing.assert_array_equal(select_regression_points(net, ds, None, 1e-4), np.arange(6))
    np.testing.assert_array_equal(select_regression_points(net, ds, 2, 1e-4), [1, 3])
    np.testing.assert_array_equal(select_regression_points(net, ds, 10, 1e-4), [1, 3, 5])
    exact = Dataset(X, np.zeros((6, 1)), "regression")
    assert select_regression_points(net, exact, None, 1e-4).size == 0


# -- solver_sweep -------------------------------------------------------------

def test_zero_radius_classification_sweep_is_infeasible():
    tr, va, _ = _blobs(2.0, 0)
    net, _ = train_gd(init_dnn([2, 32, 3], seed=0), tr, va, make_optimizer("sgd"), 3,
                      rng=np.random.default_rng(0))
    cfg = with_encoder(GdSolverConfig(), radius=0.0, bias_radius=0.0)
    new, out = solver_sweep(net, tr, "classification", cfg)
    assert out.kind is SweepKind.NO_IMPROVEMENT and out.reason == "infeasible"
    assert new is net


def test_perfect_classifier_is_skipped():
    X = np.linspace(-1, 1, 20)[:, None]
    ds = Dataset(X, (X[:, 0] >= 0).astype(int), "classification", 2)
    net = _fixed_classifier(np.array([[0.0, 1.0], [1.0, 0.0]]))
    new, out = solver_sweep(net, ds, "classification", GdSolverConfig())
    assert out.kind is SweepKind.SKIPPED and out.reason == "nothing-to-encode"
    assert new is net


def test_post_plateau_regression_sweep_improves():
    tr, va, _ = regression_splits(RegressionTask("affine"), 100, 0)
    net, hist = train_gd(init_dnn(list(REGRESSION_SIZES), seed=0), tr, va, make_optimizer("sgd"), 50,
                         PlateauDetector(), rng=np.random.default_rng(0))
    assert hist.plateaued
    new, out = solver_sweep(net, tr, "regression", GdSolverConfig())
    assert out.kind is SweepKind.IMPROVED
    assert out.before == pytest.approx(_l1(net, tr, out.encoded))
    assert _l1(new, tr, out.encoded) < out.before
    assert out.after == pytest.approx(_l1(new, tr, out.encoded))
    # only the final layer moves
    for a, b in zip(net.layers[:-1], new.layers[:-1]):
        assert np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)


def test_classification_sweep_gains_a_correct_point():
    tr, va, _ = _blobs(3.0, 1)
    net, _ = train_gd(init_dnn([2, 32, 3], seed=1), tr, va, make_optimizer("sgd"), 3,
                      rng=np.random.default_rng(1))
    new, out = solver_sweep(net, tr, "classification", GdSolverConfig())
    assert out.kind is SweepKind.IMPROVED
    idx = out.encoded
    assert np.all(np.argmax(forward(net, tr.X[idx]), axis=1) != tr.Y[idx])
    gained = int(np.sum(np.argmax(forward(new, tr.X[idx]), axis=1) == tr.Y[idx]))
    assert gained >= 1


def test_no_improvement_keeps_network_bit_identical():
    tr, va, _ = _blobs(2.0, 2)
    net, _ = train_gd(init_dnn([2, 32, 3], seed=2), tr, va, make_optimizer("sgd"), 2,
                      rng=np.random.default_rng(2))
    snapshot = net.copy()
    cfg = with_encoder(GdSolverConfig(), radius=0.0, bias_radius=0.0)
    new, out = solver_sweep(net, tr, "classification", cfg)
    assert out.kind is SweepKind.NO_IMPROVEMENT
    assert _params_equal(new, snapshot) and _params_equal(net, snapshot)


# -- gdsolver -----------------------------------------------------------------

def _identity(n=100, seed=0):
    return regression_splits(RegressionTask("identity"), n, seed)


def test_gdsolver_infinite_desired_loss_stops_after_first_sweep():
    tr, va, te = _identity()
    run = gdsolver(init_dnn(list(REGRESSION_SIZES), seed=0), tr, va,
                   GdSolverConfig(desired_loss=math.inf), "sgd", te)
    assert len(run.sweeps) <= 1
    assert [r.phase for r in run.records].count("sweep") <= 1


def test_gdsolver_max_iter_one():
    tr, va, te = _identity(seed=1)
    run = gdsolver(init_dnn(list(REGRESSION_SIZES), seed=1), tr, va,
                   GdSolverConfig(max_iter=1, seed=1), "sgd", te)
    assert len(run.sweeps) == 1


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gdsolver_beats_sgd_with_same_epochs(seed):
    tr, va, te = _identity(100, seed)
    init = init_dnn(list(REGRESSION_SIZES), seed=seed)
    run = gdsolver(init, tr, va, GdSolverConfig(max_iter=3, seed=seed), "sgd", te)
    ref, _ = train_gd(init, tr, va, make_optimizer("sgd"), run.gd_epochs, None, 32,
                      np.random.default_rng(seed))
    assert evaluate(run.final_dnn, te) < evaluate(ref, te)


def test_gdsolver_records_and_determinism():
    tr, va, te = _identity(seed=3)
    cfg = GdSolverConfig(seed=3)
    runs = [gdsolver(init_dnn(list(REGRESSION_SIZES), seed=3), tr, va, cfg, "sgd", te)
            for _ in range(2)]
    a, b = runs
    assert [(r.phase, r.epoch_or_iter, r.train_loss, r.val_loss) for r in a.records] == \
           [(r.phase, r.epoch_or_iter, r.train_loss, r.val_loss) for r in b.records]
    assert _params_equal(a.final_dnn, b.final_dnn)
    times = [r.elapsed for r in a.records]
    assert times == sorted(times)
    assert a.gd_epochs == sum(r.phase == "gd" for r in a.records)
    for s in a.sweeps:
        if s.kind is SweepKind.IMPROVED:
            assert s.after < s.before


def test_gdsolver_stops_on_no_improvement_unless_retrying():
    tr, va, te = _identity(seed=0)
    cfg = with_encoder(GdSolverConfig(max_iter=3, max_epochs_per_gd_phase=3), radius=0.0,
                       bias_radius=0.0)
    run = gdsolver(init_dnn(list(REGRESSION_SIZES), seed=0), tr, va, cfg, "sgd", te)
    assert len(run.sweeps) == 1 and run.sweeps[0].kind is SweepKind.NO_IMPROVEMENT
    retry = gdsolver(init_dnn(list(REGRESSION_SIZES), seed=0), tr, va,
                     replace(cfg, retry_on_infeasible=True), "sgd", te)
    assert len(retry.sweeps) == 3
    assert retry.gd_epochs > run.gd_epochs


def test_gdsolver_abort_keeps_partial_history():
    tr, va, te = _identity(seed=0)
    opt = make_optimizer("sgd", learning_rate=1e8)
    with np.errstate(all="ignore"):
        run = gdsolver(init_dnn(list(REGRESSION_SIZES), seed=0), tr, va, GdSolverConfig(), opt, te)
    assert run.aborted
    assert run.final_dnn is not None
    assert run.sweeps == []


# -- two_loop -----------------------------------------------------------------

def test_two_loop_without_plateau_uses_full_budget():
    tr, va, te = _blobs(2.0, 0)
    cfg = GdSolverConfig(plateau=PlateauDetector(window=100))
    run = two_loop(init_dnn([2, 32, 3], seed=0), tr, va, 10, cfg, "sgd", te)
    assert run.gd_epochs == 10
    assert [r.epoch_or_iter for r in run.records if r.phase == "gd"] == list(range(1, 11))
    assert len(run.sweeps) == 2
    assert [r.phase for r in run.records].index("sweep") == 5


def test_two_loop_early_plateau():
    tr, va, te = _blobs(2.0, 0)
    cfg = GdSolverConfig(plateau=PlateauDetector(window=3, rel_tolerance=1e9))
    run = two_loop(init_dnn([2, 32, 3], seed=0), tr, va, 10, cfg, "sgd", te)
    phases = [r.phase for r in run.records]
    assert phases.index("sweep") == 3
    assert run.gd_epochs <= 10


@pytest.mark.parametrize("e", [2, 3, 7])
def test_two_loop_budget(e):
    tr, va, te = _blobs(3.0, e)
    run = two_loop(init_dnn([2, 32, 3], seed=e), tr, va, e, GdSolverConfig(seed=e), "adam", te)
    assert run.gd_epochs <= e


def test_two_loop_rejects_tiny_budget():
    tr, va, _ = _blobs(3.0, 0)
    with pytest.raises(InvalidInputError):
        two_loop(init_dnn([2, 32, 3], seed=0), tr, va, 1, GdSolverConfig())


@pytest.mark.skipif(not os.environ.get("GDSOLVER_MNIST_DIR"), reason="set GDSOLVER_MNIST_DIR to run")
def test_two_loop_mnist_budget():
    from gdsolver.data import load_mnist
    full = load_mnist(os.environ["GDSOLVER_MNIST_DIR"], "train")
    perm = np.random.default_rng(0).permutation(len(full))
    tr, va = full.subset(perm[:500]), full.subset(perm[500:700])
    run = two_loop(init_dnn([tr.X.shape[1], 32, 10], seed=0), tr, va, 10, GdSolverConfig())
    assert run.gd_epochs <= 10
