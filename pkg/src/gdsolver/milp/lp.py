"""Bounded-variable primal simplex for the LP relaxation of a :class:`MilpModel`.

The model is brought to equality form ``A x + s = b`` with one slack per row
(slack bounds encode the row sense) and every row scaled by its largest
coefficient.  Phase 1 minimises the sum of artificials, phase 2 the real
objective.  Both phases run on a dense tableau through :func:`iterate`, which
is the compiled kernel when it was built and the numpy kernel otherwise.

Pricing is Dantzig's rule; after a run of degenerate pivots the kernel
switches to Bland's rule until progress resumes, which rules out cycling.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import NumericalError
from . import _pivot_py
from .model import MilpModel, ObjSense, Sense

log = logging.getLogger(__name__)

try:
    from . import _pivot_ext
except ImportError:  # extension not built
    _pivot_ext = None

AT_LB, AT_UB, FREE, BASIC = 0, 1, 2, 3
_KERNEL_OPTIMAL, _KERNEL_UNBOUNDED, _KERNEL_ITER_LIMIT = 0, 1, 2

_PHASE1_TOL = 1e-8

_backend = "cython" if _pivot_ext is not None else "python"


def available_backends() -> list[str]:
    return ["cython", "python"] if _pivot_ext is not None else ["python"]


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    """Select the pivot kernel: ``"cython"`` (compiled) or ``"python"`` (numpy)."""
    global _backend
    if name not in available_backends():
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}")
    _backend = name


def iterate(T, d, basis, x, status, lo, hi, max_iter, opt_tol=1e-9, piv_tol=1e-9,
            bland_after=30, backend=None):
    """Run simplex iterations in place until optimal, unbounded or ``max_iter``.

    ``T`` is the tableau ``B^-1 [A | I]``, ``d`` the reduced costs, ``x`` the
    values of every column (basic values live at ``x[basis]``) and ``status``
    holds AT_LB / AT_UB / FREE / BASIC per column.  Returns ``(code, iters)``
    with code 0 optimal, 1 unbounded, 2 iteration limit.
    """
    kernel = _pivot_ext if (backend or _backend) == "cython" else _pivot_py
    return kernel.iterate(T, d, basis, x, status, lo, hi, int(max_iter), float(opt_tol),
                          float(piv_tol), int(bland_after))


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LpSolution:
    status: LpStatus
    values: np.ndarray | None
    objective: float | None
    iterations: int = 0


class StandardForm:
    """Equality-form data for one model, reusable across bound changes.

    Branch-and-bound solves many LPs that differ only in variable bounds, so
    the matrix is assembled once and :meth:`solve` takes bound overrides.
    """

    def __init__(self, model: MilpModel):
        n, m = model.n_vars, model.n_constraints
        A = np.zeros((m, n))
        b = np.zeros(m)
        slack_lo = np.zeros(m)
        slack_hi = np.zeros(m)
        for i, con in enumerate(model.constraints):
            for c, v in con.lhs.terms:
                A[i, v] += c
            b[i] = con.rhs
            if con.sense is Sense.LE:
                slack_lo[i], slack_hi[i] = 0.0, math.inf
            elif con.sense is Sense.GE:
                slack_lo[i], slack_hi[i] = -math.inf, 0.0
        scale = np.max(np.abs(A), axis=1, initial=0.0)
        scale[scale == 0.0] = 1.0
        A /= scale[:, None]
        b /= scale
        self.n, self.m = n, m
        self.A = np.hstack([A, np.eye(m)])
        self.b = b
        self.lb, self.ub = model.bounds()
        self.slack_lo, self.slack_hi = slack_lo, slack_hi
        self.sign = -1.0 if model.objective is not None and model.objective.sense is ObjSense.MAX else 1.0
        self.c = self.sign * model.objective_vector()
        self.constant = model.objective.expr.constant if model.objective is not None else 0.0

    def user_objective(self, values: np.ndarray) -> float:
        return float(self.sign * (self.c @ values) + self.constant)

    def solve(self, lb=None, ub=None, *, opt_tol: float = 1e-9, piv_tol: float = 1e-9,
              feas_tol: float = 1e-9, backend: str | None = None) -> LpSolution:
        """Solve with structural bounds ``lb``/``ub`` (defaults: the model's).

        The returned objective is ``c @ x`` in minimisation form; use
        :meth:`user_objective` for the model's own sense.
        """
        n, m = self.n, self.m
        N = n + m
        lb = self.lb if lb is None else lb
        ub = self.ub if ub is None else ub
        if np.any(lb > ub):
            return LpSolution(LpStatus.INFEASIBLE, None, None)

        lo = np.concatenate([lb, self.slack_lo, np.zeros(m)])
        hi = np.concatenate([ub, self.slack_hi, np.zeros(m)])
        x = np.zeros(N + m)
        status = np.empty(N + m, dtype=np.int8)
        fin_lo = np.isfinite(lo[:N])
        fin_hi = np.isfinite(hi[:N])
        x[:N] = np.where(fin_lo, lo[:N], np.where(fin_hi, hi[:N], 0.0))
        status[:N] = np.where(fin_lo, AT_LB, np.where(fin_hi, AT_UB, FREE))
        status[N:] = AT_LB

        resid = self.b - self.A @ x[:N]
        basis = np.empty(m, dtype=np.int64)
        rowsign = np.ones(m)
        needs_art = np.zeros(m, dtype=bool)
        for i in range(m):
            j = n + i
            val = x[j] + resid[i]
            if lo[j] <= val <= hi[j]:
                basis[i] = j
                x[j] = val
                status[j] = BASIC
            else:
                needs_art[i] = True
                rowsign[i] = 1.0 if resid[i] >= 0 else -1.0
                basis[i] = N + i
                x[N + i] = abs(resid[i])
                hi[N + i] = math.inf
                status[N + i] = BASIC

        T = np.zeros((m, N + m))
        T[:, :N] = self.A * rowsign[:, None]
        T[np.arange(m), N + np.arange(m)] = 1.0
        full = np.hstack([self.A, np.diag(rowsign)])

        iters = 0
        if needs_art.any():
            cost = np.zeros(N + m)
            cost[N:][needs_art] = 1.0
            code, k = self._run(T, full, cost, basis, x, status, lo, hi, opt_tol, piv_tol, backend)
            iters += k
            if code != _KERNEL_OPTIMAL:
                raise NumericalError(f"phase 1 ended with kernel code {code}")
            infeas = float(np.sum(x[N:]))
            if infeas > _PHASE1_TOL * max(1.0, float(np.max(np.abs(self.b), initial=0.0))):
                return LpSolution(LpStatus.INFEASIBLE, None, None, iters)
        hi[N:] = 0.0

        cost = np.concatenate([self.c, np.zeros(2 * m)])
        code, k = self._run(T, full, cost, basis, x, status, lo, hi, opt_tol, piv_tol, backend)
        iters += k
        if code == _KERNEL_UNBOUNDED:
            return LpSolution(LpStatus.UNBOUNDED, None, None, iters)
        if code != _KERNEL_OPTIMAL:
            raise NumericalError(f"phase 2 ended with kernel code {code}")

        self._refine(full, x, basis, status, feas_tol)
        values = x[:n].copy()
        return LpSolution(LpStatus.OPTIMAL, values, float(self.c @ values), iters)

    # -- internals -----------------------------------------------------------

    def _run(self, T, full, cost, basis, x, status, lo, hi, opt_tol, piv_tol, backend):
        """Iterate to optimality, refactoring the tableau periodically."""
        m, ncol = T.shape
        refactor_every = max(200, 2 * m)
        limit = 50 * ncol + 1000
        total = 0
        while True:
            d = cost - T.T @ cost[basis]
            code, k = iterate(T, d, basis, x, status, lo, hi, refactor_every, opt_tol, piv_tol,
                              backend=backend)
            total += k
            if code != _KERNEL_ITER_LIMIT:
                return code, total
            if total >= limit:
                return code, total
            self._refactor(T, full, x, basis, status)

    def _refactor(self, T, full, x, basis, status):
        B = full[:, basis]
        try:
            T[:] = np.linalg.solve(B, full)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(self._basis_report(B, basis)) from exc
        self._recompute_basics(x, basis, status, full, B)

    def _recompute_basics(self, x, basis, status, full, B):
        nonbasic = status != BASIC
        rhs = self.b - full[:, nonbasic] @ x[nonbasic]
        try:
            x[basis] = np.linalg.solve(B, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(self._basis_report(B, basis)) from exc

    def _refine(self, full, x, basis, status, feas_tol):
        if self.m == 0:
            return
        resid = full @ x - self.b
        if np.max(np.abs(resid)) <= feas_tol:
            return
        self._recompute_basics(x, basis, status, full, full[:, basis])

    def _basis_report(self, B, basis) -> str:
        try:
            cond = float(np.linalg.cond(B))
        except np.linalg.LinAlgError:
            cond = math.inf
        return (f"numerically singular basis: {self.m} rows, condition number {cond:.3g}, "
                f"basic columns {basis.tolist()[:20]}{'...' if len(basis) > 20 else ''}")


@dataclass
class LpConfig:
    opt_tol: float = 1e-9
    piv_tol: float = 1e-9
    feas_tol: float = 1e-9


def solve_lp(model: MilpModel, cfg: LpConfig | None = None, backend: str | None = None) -> LpSolution:
    """Solve the LP relaxation of ``model`` (binaries relaxed to ``[0, 1]``).

    The objective is reported in the model's own sense; a model without an
    objective is solved as a feasibility problem with objective 0.
    """
    cfg = cfg or LpConfig()
    sf = StandardForm(model)
    sol = sf.solve(opt_tol=cfg.opt_tol, piv_tol=cfg.piv_tol, feas_tol=cfg.feas_tol, backend=backend)
    if sol.status is LpStatus.OPTIMAL:
        sol.objective = sf.user_objective(sol.values)
    return sol
