"""MILP instances: variables, linear constraints, objective, CPLEX LP export."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from ..errors import InvalidInputError

INF = math.inf


class VarKind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


class Sense(str, Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class ObjSense(str, Enum):
    MAX = "max"
    MIN = "min"


@dataclass(frozen=True)
class Variable:
    name: str
    kind: VarKind = VarKind.CONTINUOUS
    lb: float = 0.0
    ub: float = INF

    def __post_init__(self):
        object.__setattr__(self, "kind", VarKind(self.kind))
        if self.kind is VarKind.BINARY:
            object.__setattr__(self, "lb", 0.0)
            object.__setattr__(self, "ub", 1.0)
        if math.isnan(self.lb) or math.isnan(self.ub):
            raise InvalidInputError(f"variable {self.name}: NaN bound")
        if self.lb == INF or self.ub == -INF:
            raise InvalidInputError(f"variable {self.name}: bounds exclude every value")
        if self.lb > self.ub:
            raise InvalidInputError(f"variable {self.name}: lb {self.lb} > ub {self.ub}")
        if not self.name or any(ch.isspace() for ch in self.name):
            raise InvalidInputError(f"invalid variable name {self.name!r}")

    @classmethod
    def continuous(cls, name: str, lb: float = -INF, ub: float = INF) -> "Variable":
        return cls(name, VarKind.CONTINUOUS, lb, ub)

    @classmethod
    def binary(cls, name: str) -> "Variable":
        return cls(name, VarKind.BINARY)

    @property
    def is_binary(self) -> bool:
        return self.kind is VarKind.BINARY


@dataclass(frozen=True)
class LinExpr:
    terms: tuple[tuple[float, int], ...] = ()
    constant: float = 0.0

    def __init__(self, terms: Iterable[tuple[float, int]] = (), constant: float = 0.0):
        object.__setattr__(self, "terms", tuple((float(c), int(v)) for c, v in terms))
        object.__setattr__(self, "constant", float(constant))
        for c, _ in self.terms:
            if not math.isfinite(c):
                raise InvalidInputError("linear expression coefficients must be finite")

    def normalized(self) -> "LinExpr":
        """Merge repeated variables and drop zero coefficients.

        Terms keep the order of each variable's first appearance.
        """
        merged: dict[int, float] = {}
        for c, v in self.terms:
            merged[v] = merged.get(v, 0.0) + c
        return LinExpr(((c, v) for v, c in merged.items() if c != 0.0), self.constant)

    def var_ids(self) -> list[int]:
        return [v for _, v in self.terms]


@dataclass(frozen=True)
class Constraint:
    lhs: LinExpr
    sense: Sense
    rhs: float
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "sense", Sense(self.sense))
        if not math.isfinite(self.rhs):
            raise InvalidInputError("constraint rhs must be finite")


@dataclass(frozen=True)
class Objective:
    sense: ObjSense
    expr: LinExpr


@dataclass
class MilpModel:
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: Objective | None = None
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def var_id(self, name: str) -> int:
        return self._index[name]

    def add_variable(self, var: Variable) -> int:
        if var.name in self._index:
            raise InvalidInputError(f"duplicate variable name {var.name!r}")
        self._index[var.name] = len(self.variables)
        self.variables.append(var)
        return len(self.variables) - 1

    def _check_ids(self, expr: LinExpr) -> None:
        n = len(self.variables)
        for v in expr.var_ids():
            if not 0 <= v < n:
                raise InvalidInputError(f"variable id {v} is not in this model ({n} variables)")

    def add_constraint(self, c: Constraint) -> int:
        """Append ``c`` after normalising its terms; any lhs constant moves to the rhs."""
        self._check_ids(c.lhs)
        lhs = c.lhs.normalized()
        name = c.name if c.name is not None else f"c{len(self.constraints)}"
        self.constraints.append(Constraint(LinExpr(lhs.terms), c.sense, c.rhs - lhs.constant, name))
        return len(self.constraints) - 1

    def add_row(self, terms: Sequence[tuple[float, int]], sense: Sense | str, rhs: float,
                name: str | None = None) -> int:
        return self.add_constraint(Constraint(LinExpr(terms), Sense(sense), rhs, name))

    def set_objective(self, sense: ObjSense | str, terms: Sequence[tuple[float, int]],
                      constant: float = 0.0) -> None:
        expr = LinExpr(terms, constant)
        self._check_ids(expr)
        self.objective = Objective(ObjSense(sense), expr.normalized())

    def binary_ids(self) -> list[int]:
        return [k for k, v in enumerate(self.variables) if v.is_binary]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lb = np.array([v.lb for v in self.variables], dtype=np.float64)
        ub = np.array([v.ub for v in self.variables], dtype=np.float64)
        return lb, ub

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        if self.objective is not None:
            for coef, v in self.objective.expr.terms:
                c[v] += coef
        return c

    def objective_value(self, values: np.ndarray) -> float:
        if self.objective is None:
            return 0.0
        return float(self.objective_vector() @ values + self.objective.expr.constant)

    def max_violation(self, values: np.ndarray, int_tol: float | None = None) -> float:
        """Largest constraint violation of ``values``, each row scaled by its norm.

        Bound violations are included unscaled; with ``int_tol`` given,
        binaries further than that from 0/1 count as infinite violation.
        """
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (self.n_vars,):
            raise InvalidInputError("value vector does not match the model")
        worst = 0.0
        lb, ub = self.bounds()
        worst = max(worst, float(np.max(lb - values, initial=0.0)),
                    float(np.max(values - ub, initial=0.0)))
        if int_tol is not None:
            for k in self.binary_ids():
                if min(abs(values[k]), abs(values[k] - 1.0)) > int_tol:
                    return INF
        for con in self.constraints:
            act = sum(c * values[v] for c, v in con.lhs.terms)
            norm = max(1.0, math.sqrt(sum(c * c for c, _ in con.lhs.terms)))
            if con.sense is Sense.LE:
                viol = act - con.rhs
            elif con.sense is Sense.GE:
                viol = con.rhs - act
            else:
                viol = abs(act - con.rhs)
            worst = max(worst, viol / norm)
        return worst


# -- CPLEX LP format ---------------------------------------------------------

_LINE_WIDTH = 200


def _num(x: float) -> str:
    if x == 0:
        return "0"
    return format(x, ".17g")


def _expr_text(expr: LinExpr, model: MilpModel, lead: int = 0, tail: int = 0) -> str:
    parts = []
    for k, (c, v) in enumerate(expr.terms):
        name = model.variables[v].name
        if k == 0:
            parts.append(f"{'-' if c < 0 else ''}{_num(abs(c))} {name}")
        else:
            parts.append(f"{'-' if c < 0 else '+'} {_num(abs(c))} {name}")
    if expr.constant != 0.0:
        parts.append(f"{'-' if expr.constant < 0 else '+'} {_num(abs(expr.constant))}")
    if not parts:
        return "0"
    # Keep physical lines short; the format allows an expression to continue
    # on the next line.
    lines, cur = [], parts[0]
    budget = _LINE_WIDTH - lead
    for k, part in enumerate(parts[1:], start=2):
        extra = tail if k == len(parts) else 0
        if len(cur) + len(part) + 1 + extra > budget:
            lines.append(cur)
            cur = "   " + part
            budget = _LINE_WIDTH
        else:
            cur += " " + part
    lines.append(cur)
    return "\n".join(lines)


def _bound_line(var: Variable) -> str:
    lo, hi = var.lb, var.ub
    if lo == -INF and hi == INF:
        return f" {var.name} free"
    if lo == hi:
        return f" {var.name} = {_num(lo)}"
    if lo == -INF:
        return f" -inf <= {var.name} <= {_num(hi)}"
    if hi == INF:
        return f" {var.name} >= {_num(lo)}"
    return f" {_num(lo)} <= {var.name} <= {_num(hi)}"


def write_lp(model: MilpModel) -> str:
    """Render ``model`` as CPLEX LP text.

    Output is deterministic: variables and rows appear in insertion order and
    coefficients are printed with 17 significant digits.  A model without an
    objective gets the placeholder ``Minimize 0``.
    """
    lines = []
    obj = model.objective
    if obj is None:
        lines += ["Minimize", " 0"]
    else:
        lines.append("Maximize" if obj.sense is ObjSense.MAX else "Minimize")
        lines.append(f" obj: {_expr_text(obj.expr, model, lead=6)}")
    lines.append("Subject To")
    for con in model.constraints:
        head = f" {con.name}: "
        tail = f" {con.sense.value} {_num(con.rhs)}"
        lines.append(head + _expr_text(con.lhs, model, len(head), len(tail)) + tail)
    lines.append("Bounds")
    for var in model.variables:
        if not var.is_binary:
            lines.append(_bound_line(var))
    binaries = [v.name for v in model.variables if v.is_binary]
    if binaries:
        lines.append("Binaries")
        lines.extend(f" {name}" for name in binaries)
    lines.append("End")
    return "\n".join(lines) + "\n"
