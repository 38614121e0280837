"""Time the compiled and numpy pivot kernels on the same LPs.

    python benchmarks/bench_simplex.py [--repeat 3] [--sizes 40,80,160]

Two workloads: random dense LPs of growing size, and a real regression-sweep
LP built from a briefly trained network.  Both backends must agree on the
objective; the script stops if they do not.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from gdsolver.data import RegressionTask
from gdsolver.driver import train_gd
from gdsolver.encoder import encode_regression
from gdsolver.experiments import REGRESSION_SIZES, regression_splits
from gdsolver.milp import MilpModel, Sense, Variable, available_backends
from gdsolver.milp.lp import StandardForm
from gdsolver.nn import hidden_features, init_dnn
from gdsolver.optim import make_optimizer


def random_lp(n: int, seed: int) -> MilpModel:
    rng = np.random.default_rng(seed)
    m = MilpModel()
    ids = [m.add_variable(Variable.continuous(f"x{j}", -5.0, 5.0)) for j in range(n)]
    x0 = rng.uniform(-1, 1, n)
    for i in range(n):
        coef = rng.normal(size=n) * (rng.random(n) < 0.5)
        m.add_row(list(zip(coef, ids)), Sense.LE, float(coef @ x0) + rng.uniform(0, 1), f"r{i}")
    m.set_objective("max", list(zip(rng.normal(size=n), ids)))
    return m


def sweep_lp(n_train: int, seed: int = 0) -> MilpModel:
    tr, va, _ = regression_splits(RegressionTask("affine"), n_train, seed)
    net, _ = train_gd(init_dnn(list(REGRESSION_SIZES), seed=seed), tr, va, make_optimizer("sgd"),
                      5, rng=np.random.default_rng(seed))
    H = hidden_features(net, tr.X)
    return encode_regression(net.final, H, tr.Y).model


def time_backend(sf: StandardForm, backend: str, repeat: int) -> tuple[float, float, int]:
    best = np.inf
    sol = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        sol = sf.solve(backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, sol.objective, sol.iterations


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--sizes", default="40,80,160")
    ap.add_argument("--sweep-points", default="50,100")
    args = ap.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernel not built; only the numpy kernel is available")
    cases = [(f"random n={n}", random_lp(n, n)) for n in map(int, args.sizes.split(","))]
    cases += [(f"sweep T={t}", sweep_lp(t)) for t in map(int, args.sweep_points.split(","))]

    print(f"{'case':<16}{'rows':>6}{'cols':>6}{'iters':>7}" + "".join(f"{b + ' ms':>14}" for b in backends)
          + ("   speedup" if len(backends) == 2 else ""))
    for label, model in cases:
        sf = StandardForm(model)
        res = {b: time_backend(sf, b, args.repeat) for b in backends}
        objs = [r[1] for r in res.values()]
        if max(objs) - min(objs) > 1e-6 * max(1.0, abs(objs[0])):
            raise SystemExit(f"{label}: backends disagree on the objective: {objs}")
        line = f"{label:<16}{sf.m:>6}{sf.n:>6}{res[backends[0]][2]:>7}"
        line += "".join(f"{res[b][0] * 1e3:>14.2f}" for b in backends)
        if len(backends) == 2:
            line += f"{res['python'][0] / res['cython'][0]:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
