import math

import numpy as np
import pytest

from gdsolver.errors import NumericalError
from gdsolver.milp import LpStatus, MilpModel, Sense, Variable, solve_lp
from gdsolver.milp import lp as lpmod
from gdsolver.milp.lp import StandardForm, available_backends, get_backend, set_backend

from instances import random_milp
from oracles import lp_oracle


def two_var_lp():
    m = MilpModel()
    x = m.add_variable(Variable.continuous("x", 0.0))
    y = m.add_variable(Variable.continuous("y", 0.0))
    m.add_row([(1, x), (2, y)], "<=", 2)
    m.add_row([(2, x), (1, y)], "<=", 2)
    m.set_objective("max", [(1, x), (1, y)])
    return m


def test_vertex_example(backend):
    sol = solve_lp(two_var_lp(), backend=backend)
    assert sol.status is LpStatus.OPTIMAL
    np.testing.assert_allclose(sol.values, [2 / 3, 2 / 3], atol=1e-9)
    assert sol.objective == pytest.approx(4 / 3)


def test_infeasible(backend):
    m = MilpModel()
    x = m.add_variable(Variable.continuous("x"))
    m.add_row([(1, x)], ">=", 1)
    m.add_row([(1, x)], "<=", 0)
    assert solve_lp(m, backend=backend).status is LpStatus.INFEASIBLE


def test_unbounded(backend):
    m = MilpModel()
    x = m.add_variable(Variable.continuous("x"))
    m.set_objective("max", [(1, x)])
    assert solve_lp(m, backend=backend).status is LpStatus.UNBOUNDED


def test_no_rows_and_feasibility_only(backend):
    m = MilpModel()
    m.add_variable(Variable.continuous("x", -2, 3))
    y = m.add_variable(Variable.continuous("y", -1, 1))
    m.set_objective("min", [(1.0, y)], constant=10.0)
    sol = solve_lp(m, backend=backend)
    assert sol.objective == pytest.approx(9.0)
    m.objective = None
    m.add_row([(1.0, 0), (1.0, y)], "=", 2.5)
    sol = solve_lp(m, backend=backend)
    assert sol.status is LpStatus.OPTIMAL and m.max_violation(sol.values) <= 1e-9


def test_beale_cycling_example_terminates(backend):
    # classic instance on which textbook Dantzig pricing cycles
    m = MilpModel()
    x = [m.add_variable(Variable.continuous(f"x{k}", 0.0)) for k in range(4)]
    m.add_row([(0.25, x[0]), (-8, x[1]), (-1, x[2]), (9, x[3])], "<=", 0)
    m.add_row([(0.5, x[0]), (-12, x[1]), (-0.5, x[2]), (3, x[3])], "<=", 0)
    m.add_row([(1, x[2])], "<=", 1)
    m.set_objective("min", [(-0.75, x[0]), (20, x[1]), (-0.5, x[2]), (6, x[3])])
    sol = solve_lp(m, backend=backend)
    assert sol.objective == pytest.approx(-1.25)


def test_free_variables_and_equalities(backend):
    m = MilpModel()
    a = m.add_variable(Variable.continuous("a"))
    b = m.add_variable(Variable.continuous("b"))
    m.add_row([(1, a), (1, b)], "=", 4)
    m.add_row([(1, a), (-1, b)], "<=", 1)
    m.set_objective("max", [(1, a)])
    sol = solve_lp(m, backend=backend)
    np.testing.assert_allclose(sol.values, [2.5, 1.5])


@pytest.mark.parametrize("seed", range(60))
def test_random_lp_matches_highs(seed, backend):
    m = random_milp(seed, max_bin=4, max_cont=8, max_rows=10, free_frac=0.2)
    status, obj, _ = lp_oracle(m)
    sol = solve_lp(m, backend=backend)
    assert sol.status.value == status
    if status == "optimal":
        assert sol.objective == pytest.approx(obj, abs=1e-6, rel=1e-9)
        assert m.max_violation(sol.values) <= 1e-7
        lb, ub = m.bounds()
        assert np.all(sol.values >= lb - 1e-9) and np.all(sol.values <= ub + 1e-9)


def test_bound_overrides_match_oracle(backend):
    m = random_milp(7, max_bin=5, max_cont=5, max_rows=8)
    sf = StandardForm(m)
    lb, ub = sf.lb.copy(), sf.ub.copy()
    for j in m.binary_ids():
        lb[j] = ub[j] = 1.0
    sol = sf.solve(lb, ub, backend=backend)
    status, obj, _ = lp_oracle(m, lb, ub)
    assert sol.status.value == status
    if status == "optimal":
        assert sf.user_objective(sol.values) == pytest.approx(obj, abs=1e-6)


@pytest.mark.skipif(len(available_backends()) < 2, reason="compiled kernel not built")
@pytest.mark.parametrize("seed", range(20))
def test_backends_agree(seed):
    m = random_milp(100 + seed, max_bin=6, max_cont=10, max_rows=15, free_frac=0.3)
    a = solve_lp(m, backend="cython")
    b = solve_lp(m, backend="python")
    assert a.status is b.status
    if a.status is LpStatus.OPTIMAL:
        assert a.objective == pytest.approx(b.objective, abs=1e-9)
        assert a.iterations == b.iterations


def test_backend_switch():
    before = get_backend()
    try:
        set_backend("python")
        assert get_backend() == "python"
        assert solve_lp(two_var_lp()).objective == pytest.approx(4 / 3)
    finally:
        set_backend(before)
    with pytest.raises(ValueError):
        set_backend("fortran")


def test_singular_basis_reports_diagnostics():
    sf = StandardForm(two_var_lp())
    full = np.hstack([sf.A, np.eye(sf.m)])
    T = np.zeros((sf.m, full.shape[1]))
    x = np.zeros(full.shape[1])
    status = np.zeros(full.shape[1], dtype=np.int8)
    basis = np.array([0, 0])
    with pytest.raises(NumericalError, match="condition number"):
        sf._refactor(T, full, x, basis, status)


def test_kernel_reports_iteration_limit():
    # two pivots are needed; allow one
    sf = StandardForm(two_var_lp())
    m, n = sf.m, sf.n
    N = n + m
    T = np.hstack([sf.A, np.eye(m)])
    cost = np.concatenate([sf.c, np.zeros(2 * m)])
    basis = np.arange(n, N).astype(np.int64)
    d = cost - T.T @ cost[basis]
    x = np.zeros(N + m)
    x[basis] = sf.b
    status = np.zeros(N + m, dtype=np.int8)
    status[basis] = lpmod.BASIC
    lo = np.concatenate([sf.lb, sf.slack_lo, np.zeros(m)])
    hi = np.concatenate([sf.ub, sf.slack_hi, np.zeros(m)])
    code, iters = lpmod.iterate(T, d, basis, x, status, lo, hi, 1)
    assert (code, iters) == (2, 1)
