"""Depth-first branch-and-bound over binary variables."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import ConsistencyError, InvalidInputError
from .lp import LpStatus, StandardForm
from .model import MilpModel

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    time_limit: float = 30.0
    feas_tol: float = 1e-7
    int_tol: float = 1e-6
    max_nodes: int = 200_000
    gap_tol: float = 1e-6

    def __post_init__(self):
        if not (self.feas_tol > 0 and self.int_tol > 0):
            raise InvalidInputError("tolerances must be positive")
        if self.gap_tol < 0:
            raise InvalidInputError("gap_tol must be non-negative")
        if self.max_nodes < 1:
            raise InvalidInputError("max_nodes must be >= 1")


class MilpStatus(str, Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible_incumbent"
    INFEASIBLE = "infeasible"
    TIME_LIMIT_NO_INCUMBENT = "time_limit_no_incumbent"
    UNBOUNDED = "unbounded"


@dataclass
class MilpOutcome:
    status: MilpStatus
    values: np.ndarray | None
    objective: float | None
    nodes_explored: int
    wall_time: float

    @property
    def has_incumbent(self) -> bool:
        return self.values is not None


def _objective_is_integral(model: MilpModel) -> bool:
    if model.objective is None:
        return False
    expr = model.objective.expr
    if expr.constant != round(expr.constant):
        return False
    return all(model.variables[v].is_binary and c == round(c) for c, v in expr.terms)


def solve_milp(model: MilpModel, cfg: SolverConfig | None = None,
               backend: str | None = None) -> MilpOutcome:
    """Solve ``model`` by LP-based branch-and-bound on its binaries.

    Nodes are explored depth first.  The branching variable is the most
    fractional binary (lowest index on ties) and the child that agrees with
    rounding its relaxation value is explored first.  Without an objective
    the first integral feasible point ends the search.
    """
    cfg = cfg or SolverConfig()
    start = time.perf_counter()
    sf = StandardForm(model)
    binaries = np.array(model.binary_ids(), dtype=np.int64)
    feasibility_only = model.objective is None
    integral_obj = _objective_is_integral(model)

    incumbent: np.ndarray | None = None
    inc_obj = math.inf  # minimisation form
    root_bound = -math.inf
    nodes = 0

    def can_improve(bound: float) -> bool:
        if incumbent is None:
            return True
        if integral_obj:
            return bound <= inc_obj - 1.0 + 1e-6
        return bound < inc_obj - max(cfg.gap_tol * max(1.0, abs(inc_obj)), 1e-9)

    def check_dominance() -> None:
        slack = 1e-6 * max(1.0, abs(inc_obj))
        if root_bound > inc_obj + slack:
            raise ConsistencyError(
                f"relaxation bound {root_bound} exceeds incumbent objective {inc_obj}")

    def outcome(status: MilpStatus) -> MilpOutcome:
        obj = None if incumbent is None else sf.user_objective(incumbent)
        return MilpOutcome(status, incumbent, obj, nodes, time.perf_counter() - start)

    # each stack entry: (fixings as tuple of (var, value), parent bound)
    stack: list[tuple[tuple[tuple[int, int], ...], float]] = [((), -math.inf)]
    while stack:
        if time.perf_counter() - start > cfg.time_limit or nodes >= cfg.max_nodes:
            log.info("branch-and-bound stopped at %d nodes", nodes)
            return outcome(MilpStatus.FEASIBLE if incumbent is not None
                           else MilpStatus.TIME_LIMIT_NO_INCUMBENT)
        fixings, parent_bound = stack.pop()
        if not can_improve(parent_bound):
            check_dominance()
            continue
        lb, ub = sf.lb.copy(), sf.ub.copy()
        for var, val in fixings:
            lb[var] = ub[var] = val
        sol = sf.solve(lb, ub, backend=backend)
        nodes += 1
        if sol.status is LpStatus.INFEASIBLE:
            continue
        if sol.status is LpStatus.UNBOUNDED:
            return outcome(MilpStatus.UNBOUNDED)
        bound = sol.objective
        if not fixings:
            root_bound = bound
        if not can_improve(bound):
            check_dominance()
            continue

        x = sol.values
        branch_var = -1
        if binaries.size:
            frac = np.abs(x[binaries] - np.round(x[binaries]))
            k = int(np.argmax(frac))
            if frac[k] > cfg.int_tol:
                branch_var = int(binaries[k])

        if branch_var < 0:
            candidate = _polish(model, sf, x, binaries, lb, ub, cfg, backend)
            if candidate is None:
                continue
            cand_obj = float(sf.c @ candidate)
            if incumbent is None or cand_obj < inc_obj:
                incumbent, inc_obj = candidate, cand_obj
                log.debug("incumbent %.9g after %d nodes", sf.user_objective(candidate), nodes)
                check_dominance()
            if feasibility_only:
                return outcome(MilpStatus.OPTIMAL)
            continue

        first = 1 if x[branch_var] >= 0.5 else 0
        stack.append((fixings + ((branch_var, 1 - first),), bound))
        stack.append((fixings + ((branch_var, first),), bound))

    return outcome(MilpStatus.OPTIMAL if incumbent is not None else MilpStatus.INFEASIBLE)


def _polish(model, sf, x, binaries, lb, ub, cfg, backend):
    """Snap binaries to 0/1 and verify; re-solve with them fixed if needed."""
    cand = x.copy()
    cand[binaries] = np.round(cand[binaries])
    if model.max_violation(cand, cfg.int_tol) <= cfg.feas_tol:
        return cand
    lb, ub = lb.copy(), ub.copy()
    lb[binaries] = ub[binaries] = cand[binaries]
    sol = sf.solve(lb, ub, backend=backend)
    if sol.status is LpStatus.OPTIMAL and model.max_violation(sol.values, cfg.int_tol) <= cfg.feas_tol:
        return sol.values
    log.warning("discarding integral relaxation point that fails verification")
    return None
