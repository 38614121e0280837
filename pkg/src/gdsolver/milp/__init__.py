"""MILP modelling, LP-format export and the built-in branch-and-bound solver."""
from .bnb import MilpOutcome, MilpStatus, SolverConfig, solve_milp
from .lp import (LpSolution, LpStatus, available_backends, get_backend, set_backend,
                 solve_lp)
from .model import (Constraint, LinExpr, MilpModel, Objective, ObjSense, Sense, Variable,
                    VarKind, write_lp)

__all__ = [
    "Constraint", "LinExpr", "LpSolution", "LpStatus", "MilpModel", "MilpOutcome",
    "MilpStatus", "Objective", "ObjSense", "Sense", "SolverConfig", "Variable", "VarKind",
    "available_backends", "get_backend", "set_backend", "solve_lp", "solve_milp", "write_lp",
]
