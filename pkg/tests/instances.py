"""Seeded random LP/MILP instances shared by the solver tests."""
import numpy as np

from gdsolver.milp import MilpModel, Sense, Variable


def random_milp(seed, max_bin=10, max_cont=10, max_rows=15, free_frac=0.0, objective=True):
    rng = np.random.default_rng(seed)
    nb = int(rng.integers(0, max_bin + 1))
    nc = int(rng.integers(1 if nb == 0 else 0, max_cont + 1))
    m = MilpModel()
    ids = []
    for j in range(nc):
        if rng.random() < free_frac:
            ids.append(m.add_variable(Variable.continuous(f"x{j}")))
        else:
            lo = float(rng.integers(-5, 3))
            ids.append(m.add_variable(Variable.continuous(f"x{j}", lo, lo + float(rng.integers(0, 8)))))
    ids += [m.add_variable(Variable.binary(f"z{j}")) for j in range(nb)]
    # a hidden point keeps most instances feasible; random rhs noise makes some infeasible
    x0 = np.array([rng.uniform(v.lb, v.ub) if np.isfinite(v.lb) else rng.normal()
                   for v in m.variables])
    x0[nc:] = rng.integers(0, 2, nb)
    for i in range(int(rng.integers(1, max_rows + 1))):
        mask = rng.random(len(ids)) < 0.6
        coef = np.where(mask, rng.integers(-6, 7, len(ids)), 0).astype(float)
        act = float(coef @ x0)
        sense = (Sense.LE, Sense.GE, Sense.EQ)[rng.choice(3, p=[0.45, 0.45, 0.1])]
        slack = float(rng.uniform(-0.5, 2.0))
        rhs = act + slack if sense is Sense.LE else act - slack if sense is Sense.GE else act
        m.add_row([(c, v) for c, v in zip(coef, ids) if c != 0], sense, rhs, f"r{i}")
    if objective:
        obj = rng.integers(-5, 6, len(ids)).astype(float)
        m.set_objective(("max", "min")[rng.integers(2)], [(c, v) for c, v in zip(obj, ids) if c != 0])
    return m
