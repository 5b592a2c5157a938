"""Bounded-variable revised primal simplex.

Every row ``i`` of ``rl <= A x <= ru`` gets a logical variable ``s_i = a_i x``,
so the working system is ``[A, -I] [x; s] = 0`` with box bounds on both parts
and the all-logical basis is always a valid start. Phase 1 minimizes the sum
of bound violations of the basic variables with costs recomputed each
iteration; this lets any basis (e.g. a parent's optimum in branch and bound)
serve as a warm start after its bounds are tightened.

Numerics: rows are scaled to unit max-norm, the basis is factorized with
SuperLU and updated in product form between refactorizations, and the ratio
test is Harris' two-pass rule. Dantzig pricing switches to Bland's rule after a
run of degenerate pivots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .problem import MilpProblem
from .report import SolveStatus

AT_LOWER, AT_UPPER, FREE, BASIC = 0, 1, 2, 3

FEAS_TOL = 1e-7
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 64
DEGENERATE_RUN = 60


class SingularBasis(RuntimeError):
    pass


@dataclass
class Basis:
    """Simplex basis: basic column indices plus the state of every column."""

    basic: np.ndarray
    state: np.ndarray

    def copy(self) -> "Basis":
        return Basis(self.basic.copy(), self.state.copy())


@dataclass
class LPResult:
    status: SolveStatus
    x: np.ndarray  # structural values, unscaled
    objective: float
    y: np.ndarray  # row duals, unscaled
    reduced_costs: np.ndarray
    basis: Optional[Basis]
    iterations: int
    dual_bound: float
    message: str = ""


class LPData:
    """Row-scaled standard form of a problem, shared by repeated solves."""

    def __init__(self, problem: MilpProblem):
        A = problem.matrix().tocsr()
        m, n = A.shape
        rl, ru = problem.row_bounds()
        absmax = np.asarray(abs(A).max(axis=1).todense()).ravel() if m else np.zeros(0)
        scale = 1.0 / np.where(absmax > 0, absmax, 1.0)
        self.row_scale = scale
        As = sp.diags(scale) @ A
        self.A = As.tocsc()
        self.AT = As.T.tocsr()
        self.M = sp.hstack([self.A, -sp.identity(m, format="csc")], format="csc")
        self.m, self.n = m, n
        lo, hi = problem.bounds_arrays()
        with np.errstate(invalid="ignore"):
            self.lo = np.concatenate([lo, rl * scale])
            self.hi = np.concatenate([hi, ru * scale])
        self.c = np.concatenate([problem.cost_vector(), np.zeros(m)])
        self.offset = problem.objective_offset
        self.cost_scale = max(1.0, float(np.max(np.abs(self.c), initial=0.0)))

    def column(self, j: int) -> np.ndarray:
        v = np.zeros(self.m)
        if j < self.n:
            s, e = self.A.indptr[j], self.A.indptr[j + 1]
            v[self.A.indices[s:e]] = self.A.data[s:e]
        else:
            v[j - self.n] = -1.0
        return v

    def slack_basis(self) -> Basis:
        state = np.empty(self.n + self.m, dtype=np.int8)
        state[: self.n] = AT_LOWER
        state[self.n :] = BASIC
        return Basis(np.arange(self.n, self.n + self.m), state)


class _Factor:
    """LU of the basis with a product-form eta file."""

    def __init__(self, data: LPData, basic: np.ndarray):
        B = data.M[:, basic]
        try:
            self.lu = splu(B.tocsc(), permc_spec="COLAMD")
        except RuntimeError as exc:  # exactly singular
            raise SingularBasis(str(exc)) from exc
        self.etas: List[Tuple[int, np.ndarray]] = []

    def ftran(self, a: np.ndarray) -> np.ndarray:
        v = self.lu.solve(a)
        for r, alpha in self.etas:
            vr = v[r] / alpha[r]
            v -= alpha * vr
            v[r] = vr
        return v

    def btran(self, c: np.ndarray) -> np.ndarray:
        w = c.copy()
        for r, alpha in reversed(self.etas):
            wr = w[r]
            w[r] = (wr - (alpha @ w - alpha[r] * wr)) / alpha[r]
        return self.lu.solve(w, trans="T")

    def update(self, r: int, alpha: np.ndarray) -> None:
        self.etas.append((r, alpha.copy()))


def _place_nonbasic(data: LPData, basis: Basis, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Value vector with nonbasic columns at the bound named by their state."""
    x = np.zeros(data.n + data.m)
    st = basis.state
    nb = st != BASIC
    # repair states whose bound vanished
    want_lo = nb & ((st == AT_LOWER) | (st == FREE))
    want_hi = nb & (st == AT_UPPER)
    lo_fin, hi_fin = np.isfinite(lo), np.isfinite(hi)
    st[want_lo & lo_fin] = AT_LOWER
    st[want_lo & ~lo_fin & hi_fin] = AT_UPPER
    st[want_lo & ~lo_fin & ~hi_fin] = FREE
    st[want_hi & ~hi_fin & lo_fin] = AT_LOWER
    st[want_hi & ~hi_fin & ~lo_fin] = FREE
    x[nb & (st == AT_LOWER)] = lo[nb & (st == AT_LOWER)]
    x[nb & (st == AT_UPPER)] = hi[nb & (st == AT_UPPER)]
    return x


def _box_min(coef: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> float:
    """``sum_j min_{lo_j <= v <= hi_j} coef_j * v`` (may be -inf)."""
    total = 0.0
    pos = coef > 0
    neg = coef < 0
    with np.errstate(invalid="ignore"):
        total += float(np.sum(coef[pos] * lo[pos]))
        total += float(np.sum(coef[neg] * hi[neg]))
    return total if not math.isnan(total) else -math.inf


def solve_standard(
    data: LPData,
    lo: Optional[np.ndarray] = None,
    hi: Optional[np.ndarray] = None,
    basis: Optional[Basis] = None,
    max_iter: Optional[int] = None,
) -> LPResult:
    """Run the simplex on ``data`` with optional overridden bounds and warm basis."""
    lo = data.lo if lo is None else lo
    hi = data.hi if hi is None else hi
    n, m = data.n, data.m
    N = n + m
    if np.any(lo > hi + FEAS_TOL):
        return _trivial(data, SolveStatus.INFEASIBLE, "crossed bounds")
    if max_iter is None:
        max_iter = max(10_000, 20 * N)
    if m == 0:
        return _no_rows(data, lo, hi)

    basis = data.slack_basis() if basis is None else basis.copy()
    try:
        factor = _Factor(data, basis.basic)
    except SingularBasis:
        basis = data.slack_basis()
        factor = _Factor(data, basis.basic)
    x = _place_nonbasic(data, basis, lo, hi)

    def recompute_basic():
        xb_rhs = -(data.M @ x - data.M[:, basis.basic] @ x[basis.basic])
        x[basis.basic] = factor.ftran(xb_rhs)

    recompute_basic()
    dtol2 = 1e-9 * data.cost_scale
    movable = hi > lo
    it = 0
    degenerate = 0
    bland = False
    fresh = True
    restarts = 0
    status = SolveStatus.LIMIT
    message = "iteration limit"
    d = np.zeros(N)
    y = np.zeros(m)
    phase = 1

    while it < max_iter:
        if len(factor.etas) >= REFACTOR_EVERY:
            try:
                factor = _Factor(data, basis.basic)
            except SingularBasis:
                if restarts >= 2:
                    message = "numerical breakdown: singular basis"
                    break
                restarts += 1
                basis = data.slack_basis()
                factor = _Factor(data, basis.basic)
                x = _place_nonbasic(data, basis, lo, hi)
            recompute_basic()
            fresh = True

        bidx = basis.basic
        xb = x[bidx]
        lb, ub = lo[bidx], hi[bidx]
        below = xb < lb - FEAS_TOL
        above = xb > ub + FEAS_TOL
        if below.any() or above.any():
            phase = 1
            cb = np.where(below, -1.0, np.where(above, 1.0, 0.0))
            y = factor.btran(cb)
            d = -np.concatenate([data.AT @ y, -y])
            dtol = 1e-9
        else:
            phase = 2
            cb = data.c[bidx]
            y = factor.btran(cb)
            d = data.c - np.concatenate([data.AT @ y, -y])
            dtol = dtol2
        d[bidx] = 0.0
        st = basis.state
        inc = movable & ((st == AT_LOWER) | (st == FREE)) & (d < -dtol)
        dec = movable & ((st == AT_UPPER) | (st == FREE)) & (d > dtol)
        cand = inc | dec
        if not cand.any():
            if not fresh:
                # confirm on a clean factorization before declaring
                try:
                    factor = _Factor(data, basis.basic)
                except SingularBasis:
                    message = "numerical breakdown: singular basis"
                    break
                recompute_basic()
                fresh = True
                continue
            if phase == 1:
                status, message = SolveStatus.INFEASIBLE, "phase 1 stalled with positive infeasibility"
            else:
                status, message = SolveStatus.OPTIMAL, ""
            break

        if bland:
            q = int(np.flatnonzero(cand)[0])
        else:
            score = np.where(cand, np.abs(d), -1.0)
            q = int(np.argmax(score))
        sigma = 1.0 if inc[q] else -1.0
        alpha = factor.ftran(data.column(q))
        rate = -sigma * alpha

        # targets for each basic variable along the ray
        feas = ~(below | above)
        dec_mask = rate < -PIVOT_TOL
        inc_mask = rate > PIVOT_TOL
        target = np.full(m, np.nan)
        to_lo = (dec_mask & feas & np.isfinite(lb)) | (inc_mask & below)
        to_hi = (inc_mask & feas & np.isfinite(ub)) | (dec_mask & above)
        target[to_lo] = lb[to_lo]
        target[to_hi] = ub[to_hi]
        has = to_lo | to_hi
        ratio = np.full(m, math.inf)
        ratio[has] = np.maximum((target[has] - xb[has]) / rate[has], 0.0)
        flip = hi[q] - lo[q]

        if bland:
            tmin = float(np.min(ratio)) if has.any() else math.inf
            if flip <= tmin and math.isfinite(flip):
                r = -1
                theta = flip
            else:
                ties = np.flatnonzero(ratio <= tmin + 1e-12)
                r = int(ties[np.argmin(bidx[ties])])
                theta = float(ratio[r])
        else:
            relaxed = np.full(m, math.inf)
            relaxed[has] = ratio[has] + FEAS_TOL / np.abs(rate[has])
            tmax = float(np.min(relaxed)) if has.any() else math.inf
            if flip <= tmax and math.isfinite(flip):
                r = -1
                theta = flip
            elif not math.isfinite(tmax):
                r = -2
                theta = math.inf
            else:
                pool = has & (ratio <= tmax)
                cands = np.flatnonzero(pool)
                r = int(cands[np.argmax(np.abs(rate[cands]))])
                theta = float(ratio[r])

        if r == -2 or (bland and not math.isfinite(theta)):
            if phase == 2:
                status, message = SolveStatus.UNBOUNDED, "unbounded ray"
            else:
                message = "phase 1 ray without breakpoint"
            break

        it += 1
        x[q] += sigma * theta
        x[bidx] = xb + rate * theta
        if theta <= 1e-12:
            degenerate += 1
            if degenerate > DEGENERATE_RUN:
                bland = True
        else:
            degenerate = 0
            bland = False
        if r == -1:
            st[q] = AT_UPPER if sigma > 0 else AT_LOWER
            if st[q] == AT_UPPER and not np.isfinite(hi[q]):
                st[q] = FREE
            continue

        p = int(bidx[r])
        if to_lo[r]:
            x[p] = lo[p]
            st[p] = AT_LOWER
        else:
            x[p] = hi[p]
            st[p] = AT_UPPER
        basis.basic[r] = q
        st[q] = BASIC
        factor.update(r, alpha)
        fresh = False

    xs = x[:n].copy()
    obj = float(data.c[:n] @ xs) + data.offset
    dual_bound = -math.inf
    red = d[:n].copy()
    if status is SolveStatus.OPTIMAL:
        dd = np.where(np.abs(d) < dtol2, 0.0, d)
        yy = np.where(np.abs(y) < dtol2, 0.0, y)
        dual_bound = (
            _box_min(dd[:n], lo[:n], hi[:n])
            + _box_min(yy, lo[n:], hi[n:])
            + data.offset
        )
    return LPResult(
        status=status,
        x=xs,
        objective=obj if status is SolveStatus.OPTIMAL else math.nan,
        y=y * data.row_scale,
        reduced_costs=red,
        basis=basis if status is SolveStatus.OPTIMAL else None,
        iterations=it,
        dual_bound=dual_bound,
        message=message,
    )


def _trivial(data: LPData, status: SolveStatus, message: str) -> LPResult:
    return LPResult(status, np.zeros(data.n), math.nan, np.zeros(data.m), np.zeros(data.n), None, 0, -math.inf, message)


def _no_rows(data: LPData, lo: np.ndarray, hi: np.ndarray) -> LPResult:
    c = data.c[: data.n]
    lo, hi = lo[: data.n], hi[: data.n]
    x = np.where(c > 0, lo, np.where(c < 0, hi, np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))))
    if not np.all(np.isfinite(x)):
        return _trivial(data, SolveStatus.UNBOUNDED, "unbounded variable with no rows")
    obj = float(c @ x) + data.offset
    return LPResult(SolveStatus.OPTIMAL, x, obj, np.zeros(0), c.copy(), None, 0, obj)
