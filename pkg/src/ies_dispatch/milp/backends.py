"""Solver backends.

The bundled branch-and-bound solver is the default. External adapters take
the exported LP text (which carries the integrality markers in its
``Binaries`` section) and return a :class:`SolveReport`, so anything that reads
LP files can serve as a cross-check. Selection: argument, else the
``IES_SOLVER`` environment variable, else ``bundled``.
"""

from __future__ import annotations

import math
import os
import tempfile
import time
from typing import Callable, Dict, Optional

import numpy as np

from .branch_bound import MilpOptions, solve_milp
from .lpformat import export_problem, parse_lp
from .problem import MilpProblem
from .report import SolveReport, SolveStatus

Backend = Callable[[MilpProblem, MilpOptions], SolveReport]


def _bundled(problem: MilpProblem, options: MilpOptions) -> SolveReport:
    return solve_milp(problem, options)


def solve_lp_text_highs(text: str, options: MilpOptions) -> SolveReport:
    """Solve LP-format text with HiGHS (``highspy``); names map back via the file."""
    import highspy

    start = time.perf_counter()
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", options.mip_gap)
    h.setOptionValue("time_limit", float(options.time_limit))
    with tempfile.NamedTemporaryFile("w", suffix=".lp", delete=False) as fh:
        fh.write(text)
        path = fh.name
    try:
        h.readModel(path)
    finally:
        os.unlink(path)
    h.run()
    status = h.getModelStatus()
    ms = highspy.HighsModelStatus
    mapping = {
        ms.kOptimal: SolveStatus.OPTIMAL,
        ms.kInfeasible: SolveStatus.INFEASIBLE,
        ms.kUnbounded: SolveStatus.UNBOUNDED,
        ms.kUnboundedOrInfeasible: SolveStatus.INFEASIBLE,
    }
    st = mapping.get(status, SolveStatus.LIMIT)
    rep = SolveReport(status=st, wall_time=time.perf_counter() - start, backend="highs")
    if st is SolveStatus.OPTIMAL:
        lp = h.getLp()
        sol = h.getSolution()
        info = h.getInfo()
        names = list(lp.col_names_)
        values = np.asarray(sol.col_value, dtype=float)
        rep.primal = dict(zip(names, values.tolist()))
        rep.objective = float(info.objective_function_value)
        gap = getattr(info, "mip_gap", 0.0)
        rep.gap = 0.0 if (gap is None or not math.isfinite(gap) or gap < 0) else float(gap)
        rep.nodes = int(max(0, getattr(info, "mip_node_count", 0)))
    return rep


def _scipy_from_text(text: str, options: MilpOptions) -> SolveReport:
    from scipy.optimize import Bounds, LinearConstraint, milp

    start = time.perf_counter()
    prob = parse_lp(text)
    lo, hi = prob.bounds_arrays()
    rl, ru = prob.row_bounds()
    integrality = np.array([1 if v.is_binary else 0 for v in prob.variables])
    cons = [LinearConstraint(prob.matrix(), rl, ru)] if prob.num_constraints else []
    res = milp(
        prob.cost_vector(), constraints=cons, bounds=Bounds(lo, hi), integrality=integrality,
        options={"mip_rel_gap": options.mip_gap, "time_limit": options.time_limit},
    )
    status = {0: SolveStatus.OPTIMAL, 2: SolveStatus.INFEASIBLE, 3: SolveStatus.UNBOUNDED}.get(
        res.status, SolveStatus.LIMIT
    )
    rep = SolveReport(status=status, wall_time=time.perf_counter() - start, backend="scipy-highs")
    if status is SolveStatus.OPTIMAL:
        rep.x = np.asarray(res.x)
        rep.primal = {v.name: float(res.x[i]) for i, v in enumerate(prob.variables)}
        rep.objective = float(res.fun) + prob.objective_offset
        rep.gap = float(getattr(res, "mip_gap", 0.0) or 0.0)
    return rep


def _external(problem: MilpProblem, options: MilpOptions) -> SolveReport:
    text = export_problem(problem)
    try:
        rep = solve_lp_text_highs(text, options)
    except ImportError:
        rep = _scipy_from_text(text, options)
    if rep.ok:
        rep.x = np.array([rep.primal[v.name] for v in problem.variables])
    return rep


BACKENDS: Dict[str, Backend] = {"bundled": _bundled, "highs": _external}


def get_backend(name: Optional[str] = None) -> Backend:
    key = (name or os.environ.get("IES_SOLVER") or "bundled").lower()
    try:
        return BACKENDS[key]
    except KeyError:
        raise ValueError(f"unknown solver backend {key!r}; choose from {sorted(BACKENDS)}") from None


def solve(problem: MilpProblem, options: Optional[MilpOptions] = None, backend: Optional[str] = None) -> SolveReport:
    return get_backend(backend)(problem, options or MilpOptions())
