"""Solver-independent MILP intermediate representation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

Number = Union[int, float]


class Relation(str, Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class Integrality(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


class LinExpr:
    """Affine expression ``sum(coef * var) + constant`` over variable indices."""

    __slots__ = ("terms", "constant")

    def __init__(self, terms: Optional[Mapping[int, float]] = None, constant: float = 0.0):
        self.terms: Dict[int, float] = dict(terms) if terms else {}
        self.constant = float(constant)

    @classmethod
    def var(cls, index: int, coef: float = 1.0) -> "LinExpr":
        return cls({index: float(coef)})

    @classmethod
    def const(cls, value: float) -> "LinExpr":
        return cls(None, value)

    @classmethod
    def sum(cls, items: Iterable[Union["LinExpr", Number]]) -> "LinExpr":
        out = cls()
        for item in items:
            out += item
        return out

    def copy(self) -> "LinExpr":
        return LinExpr(self.terms, self.constant)

    def __iadd__(self, other):
        if isinstance(other, LinExpr):
            for k, v in other.terms.items():
                self.terms[k] = self.terms.get(k, 0.0) + v
            self.constant += other.constant
        else:
            self.constant += float(other)
        return self

    def __add__(self, other):
        out = self.copy()
        out += other
        return out

    __radd__ = __add__

    def __neg__(self):
        return LinExpr({k: -v for k, v in self.terms.items()}, -self.constant)

    def __sub__(self, other):
        return self + (-other if isinstance(other, LinExpr) else -float(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar: Number):
        s = float(scalar)
        return LinExpr({k: v * s for k, v in self.terms.items()}, self.constant * s)

    __rmul__ = __mul__

    def value(self, x: np.ndarray) -> float:
        return self.constant + sum(v * x[k] for k, v in self.terms.items())

    def __repr__(self) -> str:
        inner = " + ".join(f"{v:g}*x{k}" for k, v in sorted(self.terms.items()))
        return f"LinExpr({inner or '0'} + {self.constant:g})"


@dataclass
class Variable:
    name: str
    lower: float = 0.0
    upper: float = math.inf
    integrality: Integrality = Integrality.CONTINUOUS

    @property
    def is_binary(self) -> bool:
        return self.integrality is Integrality.BINARY


@dataclass
class Constraint:
    name: str
    coefficients: Dict[int, float]
    relation: Relation
    rhs: float


@dataclass
class MilpProblem:
    """A minimization MILP: bounded variables, sparse linear rows, linear objective.

    Builders append to a problem in place. ``objective_offset`` carries the
    constant part of the objective so the reported value is the full cost.
    """

    name: str = "problem"
    variables: List[Variable] = field(default_factory=list)
    constraints: List[Constraint] = field(default_factory=list)
    objective: Dict[int, float] = field(default_factory=dict)
    objective_offset: float = 0.0
    _var_index: Dict[str, int] = field(default_factory=dict, repr=False)
    _con_index: Dict[str, int] = field(default_factory=dict, repr=False)

    # -- construction -----------------------------------------------------
    def add_var(
        self,
        name: str,
        lower: float = 0.0,
        upper: float = math.inf,
        binary: bool = False,
    ) -> int:
        if name in self._var_index:
            raise ValueError(f"duplicate variable name {name!r}")
        if lower > upper:
            raise ValueError(f"variable {name!r}: lower {lower} > upper {upper}")
        if binary and (lower < 0 or upper > 1):
            raise ValueError(f"binary {name!r} bounds must lie within [0, 1]")
        kind = Integrality.BINARY if binary else Integrality.CONTINUOUS
        self.variables.append(Variable(name, float(lower), float(upper), kind))
        idx = len(self.variables) - 1
        self._var_index[name] = idx
        return idx

    def add_vars(self, prefix: str, count: int, lower=0.0, upper=math.inf, binary=False) -> List[int]:
        """Add ``count`` hourly variables named ``{prefix}_tNN``; bounds may be scalars or sequences."""
        lo = np.broadcast_to(np.asarray(lower, dtype=float), (count,))
        hi = np.broadcast_to(np.asarray(upper, dtype=float), (count,))
        return [
            self.add_var(f"{prefix}_t{t:02d}", float(lo[t]), float(hi[t]), binary)
            for t in range(count)
        ]

    def add_constraint(
        self,
        lhs: Union[LinExpr, Mapping[int, float]],
        relation: Union[Relation, str],
        rhs: Union[LinExpr, Number] = 0.0,
        name: Optional[str] = None,
    ) -> int:
        """Add ``lhs (relation) rhs``; expression constants are moved to the right-hand side."""
        expr = lhs if isinstance(lhs, LinExpr) else LinExpr(lhs)
        if isinstance(rhs, LinExpr):
            expr = expr - rhs
            rhs_value = 0.0
        else:
            rhs_value = float(rhs)
        coefs = {k: v for k, v in expr.terms.items() if v != 0.0}
        for k in coefs:
            if not 0 <= k < len(self.variables):
                raise IndexError(f"constraint references undeclared variable {k}")
        if name is None:
            name = f"c{len(self.constraints)}"
        if name in self._con_index:
            raise ValueError(f"duplicate constraint name {name!r}")
        self.constraints.append(
            Constraint(name, coefs, Relation(relation), rhs_value - expr.constant)
        )
        idx = len(self.constraints) - 1
        self._con_index[name] = idx
        return idx

    def add_objective(self, expr: Union[LinExpr, Mapping[int, float]], scale: float = 1.0) -> None:
        expr = expr if isinstance(expr, LinExpr) else LinExpr(expr)
        for k, v in expr.terms.items():
            self.objective[k] = self.objective.get(k, 0.0) + scale * v
        self.objective_offset += scale * expr.constant

    # -- lookup -----------------------------------------------------------
    def var_index(self, name: str) -> int:
        return self._var_index[name]

    def constraint_index(self, name: str) -> int:
        return self._con_index[name]

    def has_var(self, name: str) -> bool:
        return name in self._var_index

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    @property
    def binary_indices(self) -> List[int]:
        return [i for i, v in enumerate(self.variables) if v.is_binary]

    # -- checks -----------------------------------------------------------
    def check(self) -> List[str]:
        """Return structural defects (empty when the problem is well formed)."""
        issues = []
        n = len(self.variables)
        for i, v in enumerate(self.variables):
            if v.lower > v.upper:
                issues.append(f"variable {v.name}: lower > upper")
            if v.is_binary and (v.lower < 0 or v.upper > 1):
                issues.append(f"variable {v.name}: binary bounds outside [0, 1]")
        for c in self.constraints:
            for k in c.coefficients:
                if not 0 <= k < n:
                    issues.append(f"constraint {c.name}: unknown variable {k}")
        for k in self.objective:
            if not 0 <= k < n:
                issues.append(f"objective: unknown variable {k}")
        if len(self._var_index) != n:
            issues.append("variable names are not unique")
        return issues

    # -- dense/sparse views -----------------------------------------------
    def bounds_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        lo = np.array([v.lower for v in self.variables], dtype=float)
        hi = np.array([v.upper for v in self.variables], dtype=float)
        return lo, hi

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(len(self.variables))
        for k, v in self.objective.items():
            c[k] = v
        return c

    def matrix(self) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        for i, c in enumerate(self.constraints):
            for k, v in c.coefficients.items():
                rows.append(i)
                cols.append(k)
                vals.append(v)
        return sp.csr_matrix(
            (vals, (rows, cols)), shape=(len(self.constraints), len(self.variables))
        )

    def row_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """Row activity bounds ``rl <= A x <= ru``."""
        m = len(self.constraints)
        rl = np.full(m, -math.inf)
        ru = np.full(m, math.inf)
        for i, c in enumerate(self.constraints):
            if c.relation is Relation.LE:
                ru[i] = c.rhs
            elif c.relation is Relation.GE:
                rl[i] = c.rhs
            else:
                rl[i] = ru[i] = c.rhs
        return rl, ru

    def evaluate_objective(self, x: np.ndarray) -> float:
        return self.objective_offset + float(sum(v * x[k] for k, v in self.objective.items()))

    def max_violation(self, x: np.ndarray, scaled: bool = True) -> float:
        """Largest bound or row violation of ``x``; rows optionally scaled by their max coefficient."""
        lo, hi = self.bounds_arrays()
        worst = float(max(np.max(lo - x, initial=0.0), np.max(x - hi, initial=0.0)))
        for c in self.constraints:
            act = sum(v * x[k] for k, v in c.coefficients.items())
            scale = max((abs(v) for v in c.coefficients.values()), default=1.0) if scaled else 1.0
            scale = scale or 1.0
            if c.relation is Relation.LE:
                viol = act - c.rhs
            elif c.relation is Relation.GE:
                viol = c.rhs - act
            else:
                viol = abs(act - c.rhs)
            worst = max(worst, viol / scale)
        return worst

    def relaxed(self) -> "MilpProblem":
        """Copy with every binary relaxed to a continuous [0, 1] variable."""
        out = MilpProblem(
            name=self.name,
            variables=[Variable(v.name, v.lower, v.upper) for v in self.variables],
            constraints=list(self.constraints),
            objective=dict(self.objective),
            objective_offset=self.objective_offset,
        )
        out._var_index = dict(self._var_index)
        out._con_index = dict(self._con_index)
        return out
