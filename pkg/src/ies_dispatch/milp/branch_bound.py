"""Best-first branch and bound over binary variables."""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from .problem import MilpProblem
from .report import SolveReport, SolveStatus
from .simplex import Basis, LPData, LPResult, solve_standard

logger = logging.getLogger(__name__)


@dataclass
class MilpOptions:
    mip_gap: float = 1e-4
    node_limit: int = 50_000
    time_limit: float = 600.0
    int_tol: float = 1e-6
    rounding_every: int = 25  # run the rounding heuristic every N nodes (root always)
    # binary values by variable name tried as a first incumbent; missing binaries take 0
    start: Optional[Mapping[str, float]] = None


def _report(problem: MilpProblem, res: LPResult, start: float) -> SolveReport:
    rep = SolveReport(
        status=res.status,
        objective=res.objective,
        iterations=res.iterations,
        wall_time=time.perf_counter() - start,
        dual_bound=res.dual_bound,
        message=res.message,
    )
    if res.status is SolveStatus.OPTIMAL:
        rep.x = res.x
        rep.primal = {v.name: float(res.x[i]) for i, v in enumerate(problem.variables)}
        rep.gap = 0.0
    return rep


def solve_lp(problem: MilpProblem) -> SolveReport:
    """Solve the continuous relaxation of ``problem`` (binaries relaxed to [0, 1])."""
    start = time.perf_counter()
    res = solve_standard(LPData(problem))
    return _report(problem, res, start)


def _bounds_with(data: LPData, fixings: Dict[int, float]) -> Tuple[np.ndarray, np.ndarray]:
    lo = data.lo.copy()
    hi = data.hi.copy()
    for j, v in fixings.items():
        lo[j] = hi[j] = v
    return lo, hi


def _rel_gap(incumbent: float, bound: float) -> float:
    if not math.isfinite(incumbent):
        return math.inf
    return max(0.0, incumbent - bound) / max(1.0, abs(incumbent))


def solve_milp(problem: MilpProblem, options: Optional[MilpOptions] = None) -> SolveReport:
    """Minimize ``problem`` to within ``options.mip_gap`` relative gap.

    Nodes are expanded in order of their parent's LP bound, ties going to the
    earlier-created node; the branching variable is the most fractional
    binary, ties going to the lowest index. Each child warm-starts from its
    parent's optimal basis.
    """
    opts = options or MilpOptions()
    start = time.perf_counter()
    data = LPData(problem)
    binaries = np.array(problem.binary_indices, dtype=int)
    root = solve_standard(data)
    if binaries.size == 0 or root.status is not SolveStatus.OPTIMAL:
        rep = _report(problem, root, start)
        rep.nodes = 1
        if rep.ok:
            rep.incumbent_history = [rep.objective]
        return rep

    inc_obj = math.inf
    inc_x: Optional[np.ndarray] = None
    history = []
    total_iter = root.iterations
    limit_hit = False
    unresolved = False

    def try_incumbent(x: np.ndarray, obj: float) -> None:
        nonlocal inc_obj, inc_x
        if obj < inc_obj - 1e-12 * max(1.0, abs(obj)):
            inc_obj, inc_x = obj, x.copy()
            history.append(obj)
            logger.debug("incumbent %.6f", obj)

    def fractional(x: np.ndarray) -> Optional[int]:
        vals = x[binaries]
        frac = np.abs(vals - np.round(vals))
        if frac.max() <= opts.int_tol:
            return None
        score = np.minimum(vals - np.floor(vals), np.ceil(vals) - vals)
        return int(binaries[int(np.argmax(score))])

    def rounding(res: LPResult, fixings: Dict[int, float]) -> None:
        nonlocal total_iter
        fix = dict(fixings)
        for j in binaries:
            if j not in fix:
                fix[int(j)] = float(np.round(res.x[j]))
        lo, hi = _bounds_with(data, fix)
        heur = solve_standard(data, lo, hi, res.basis)
        total_iter += heur.iterations
        if heur.status is SolveStatus.OPTIMAL:
            try_incumbent(heur.x, heur.objective)

    def warm_start() -> None:
        nonlocal total_iter
        fix = {int(j): float(round(opts.start.get(problem.variables[j].name, 0.0))) for j in binaries}
        lo, hi = _bounds_with(data, fix)
        res = solve_standard(data, lo, hi, root.basis)
        total_iter += res.iterations
        if res.status is SolveStatus.OPTIMAL:
            try_incumbent(res.x, res.objective)

    def prunable(bound: float) -> bool:
        if not math.isfinite(inc_obj):
            return False
        return bound >= inc_obj - opts.mip_gap * max(1.0, abs(inc_obj))

    seq = 0
    heap: list = []
    nodes = 1
    j0 = fractional(root.x)
    if j0 is None:
        try_incumbent(root.x, root.objective)
    else:
        if opts.start:
            warm_start()
        rounding(root, {})
        if not prunable(root.objective):
            heapq.heappush(heap, (root.objective, seq, {}, root.basis, root.x))
            seq += 1

    while heap:
        if nodes >= opts.node_limit or time.perf_counter() - start > opts.time_limit:
            limit_hit = True
            break
        bound, _, fixings, basis, parent_x = heapq.heappop(heap)
        if prunable(bound):
            continue
        j = fractional(parent_x)
        if j is None:
            continue
        up_first = parent_x[j] >= 0.5
        for val in ((1.0, 0.0) if up_first else (0.0, 1.0)):
            child = dict(fixings)
            child[j] = val
            lo, hi = _bounds_with(data, child)
            res = solve_standard(data, lo, hi, basis)
            nodes += 1
            total_iter += res.iterations
            if res.status is SolveStatus.INFEASIBLE:
                continue
            if res.status is not SolveStatus.OPTIMAL:
                unresolved = True
                continue
            if prunable(res.objective):
                continue
            if fractional(res.x) is None:
                try_incumbent(res.x, res.objective)
                continue
            if opts.rounding_every and nodes % opts.rounding_every == 0:
                rounding(res, child)
            heapq.heappush(heap, (res.objective, seq, child, res.basis, res.x))
            seq += 1
        best_open = heap[0][0] if heap else inc_obj
        if _rel_gap(inc_obj, min(best_open, inc_obj)) <= opts.mip_gap and math.isfinite(inc_obj):
            break

    best_bound = min([h[0] for h in heap], default=inc_obj)
    best_bound = min(best_bound, inc_obj)
    wall = time.perf_counter() - start
    if inc_x is None:
        status = SolveStatus.LIMIT if (limit_hit or unresolved) else SolveStatus.INFEASIBLE
        return SolveReport(status=status, nodes=nodes, wall_time=wall, iterations=total_iter,
                           message="no integer-feasible point found")
    gap = _rel_gap(inc_obj, best_bound)
    status = SolveStatus.OPTIMAL
    message = ""
    if gap > opts.mip_gap or unresolved:
        status = SolveStatus.LIMIT
        message = "node/time limit reached" if limit_hit else "unresolved node LPs"
    # snap binaries onto {0, 1}
    x = inc_x.copy()
    x[binaries] = np.round(x[binaries])
    return SolveReport(
        status=status,
        objective=inc_obj,
        primal={v.name: float(x[i]) for i, v in enumerate(problem.variables)},
        gap=gap,
        nodes=nodes,
        wall_time=wall,
        x=x,
        dual_bound=best_bound,
        iterations=total_iter,
        message=message,
        incumbent_history=history,
    )
