"""MILP intermediate representation, bundled simplex/branch-and-bound solver, LP text I/O."""

from .backends import get_backend, solve
from .branch_bound import MilpOptions, solve_lp, solve_milp
from .lpformat import export_problem, parse_lp
from .problem import Constraint, Integrality, LinExpr, MilpProblem, Relation, Variable
from .report import SolveReport, SolveStatus

__all__ = [
    "Constraint",
    "Integrality",
    "LinExpr",
    "MilpOptions",
    "MilpProblem",
    "Relation",
    "SolveReport",
    "SolveStatus",
    "Variable",
    "export_problem",
    "get_backend",
    "parse_lp",
    "solve",
    "solve_lp",
    "solve_milp",
]
