"""Carbon accounting: free allowances, net emissions and the stepped trading cost.

The stepped cost of net emissions ``delta`` (actual minus allowance, tonnes)
uses base price ``c``, interval ``d`` and growth ``a``. Above the allowance
the price rises by ``c*a`` per interval up to six intervals; below it the
system is rewarded at ``c`` for the first interval and ``c*(1+a)`` beyond.
The slope drops from ``c*(1+a)`` to ``c`` at ``-d``, so the curve is not
convex and its MILP encoding needs a binary at that knot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from .milp import LinExpr, MilpProblem
from .model import CarbonMarketParams, TimeSeries

MAX_STEPS = 6


@dataclass(frozen=True)
class LadderSpec:
    base_price: float
    interval: float
    growth: float

    @classmethod
    def from_market(cls, params: CarbonMarketParams) -> "LadderSpec":
        return cls(params.base_price, params.interval, params.growth)

    @property
    def knots(self) -> List[float]:
        d = self.interval
        return [-d] + [k * d for k in range(MAX_STEPS + 1)]

    @property
    def slopes(self) -> List[float]:
        """Slope of each of the nine pieces, in order of increasing delta."""
        c, a = self.base_price, self.growth
        return [c * (1 + a), c, c] + [c * (1 + k * a) for k in range(1, MAX_STEPS + 1)]

    @property
    def breakpoints(self) -> List[Tuple[float, float]]:
        return [(k, ladder_cost(self, k)) for k in self.knots]

    def slope_at(self, delta: float) -> float:
        """Slope of the piece containing ``delta`` (right-continuous)."""
        idx = int(np.searchsorted(self.knots, delta, side="right"))
        return self.slopes[idx]


def ladder_cost(spec: LadderSpec, delta: float) -> float:
    """Closed-form stepped carbon cost; negative values are revenue."""
    c, d, a = spec.base_price, spec.interval, spec.growth
    if delta < -d:
        return -c * d - c * (1 + a) * (-d - delta)
    if delta < d:
        return c * delta
    for k in range(1, MAX_STEPS):
        if delta < (k + 1) * d:
            # accumulated cost at k*d is c*d*(k + a*k(k-1)/2)
            return c * (k + a * k * (k - 1) / 2) * d + c * (1 + k * a) * (delta - k * d)
    k = MAX_STEPS
    return c * (k + a * k * (k - 1) / 2) * d + c * (1 + k * a) * (delta - k * d)


def ladder_pieces(spec: LadderSpec, lower: float, upper: float) -> List[Tuple[float, float, float]]:
    """``(start, end, slope)`` pieces covering ``[lower, upper]``; equal-slope neighbours merged."""
    if not (math.isfinite(lower) and math.isfinite(upper)) or lower >= upper:
        raise ValueError(f"ladder bracket ({lower}, {upper}) must be finite with lower < upper")
    cuts = [lower] + [k for k in spec.knots if lower < k < upper] + [upper]
    pieces: List[Tuple[float, float, float]] = []
    for s, e in zip(cuts, cuts[1:]):
        slope = spec.slope_at(0.5 * (s + e))
        if pieces and math.isclose(pieces[-1][2], slope, rel_tol=0, abs_tol=1e-12):
            pieces[-1] = (pieces[-1][0], e, slope)
        else:
            pieces.append((s, e, slope))
    return pieces


def linearize_ladder(
    spec: LadderSpec,
    delta_bounds: Tuple[float, float],
    problem: MilpProblem,
    prefix: str = "carbon",
    all_binaries: bool = False,
) -> Tuple[int, int]:
    """Add an exact incremental encoding of the ladder; returns ``(cost_var, delta_var)``.

    ``delta = lower + sum(fill_k)`` and ``cost = f(lower) + sum(slope_k * fill_k)``.
    Pieces with non-decreasing slopes fill in order on their own under
    minimization; where the slope drops a binary ``z`` gates the fill so the
    earlier pieces are full before later ones start (``fill_j >= len_j z`` up to
    the knot, ``fill_j <= len_j z`` after it, chained ``z_next <= z``).
    ``all_binaries`` places a binary at every knot instead.
    """
    lower, upper = delta_bounds
    pieces = ladder_pieces(spec, lower, upper)
    f_lo, f_hi = ladder_cost(spec, lower), ladder_cost(spec, upper)
    delta = problem.add_var(f"{prefix}_delta", lower, upper)
    cost = problem.add_var(f"{prefix}_cost", min(f_lo, f_hi), max(f_lo, f_hi))
    fills = [
        problem.add_var(f"{prefix}_fill{k}", 0.0, e - s) for k, (s, e, _) in enumerate(pieces)
    ]
    lengths = [e - s for s, e, _ in pieces]
    problem.add_constraint(
        LinExpr.var(delta) - LinExpr.sum(LinExpr.var(f) for f in fills), "=", lower,
        name=f"{prefix}_delta_def",
    )
    problem.add_constraint(
        LinExpr.var(cost) - LinExpr.sum(LinExpr.var(f, p[2]) for f, p in zip(fills, pieces)),
        "=", f_lo, name=f"{prefix}_cost_def",
    )
    gated = [
        k for k in range(len(pieces) - 1)
        if all_binaries or pieces[k + 1][2] < pieces[k][2] - 1e-12
    ]
    prev_z = None
    bounds = gated + [len(pieces) - 1]
    for i, k in enumerate(gated):
        z = problem.add_var(f"{prefix}_step{k}", 0.0, 1.0, binary=True)
        start = gated[i - 1] + 1 if i else 0
        for j in range(start, k + 1):
            problem.add_constraint(
                LinExpr.var(fills[j]) - LinExpr.var(z, lengths[j]), ">=", 0.0,
                name=f"{prefix}_full{j}_z{k}",
            )
        for j in range(k + 1, bounds[i + 1] + 1):
            problem.add_constraint(
                LinExpr.var(fills[j]) - LinExpr.var(z, lengths[j]), "<=", 0.0,
                name=f"{prefix}_open{j}_z{k}",
            )
        if prev_z is not None:
            problem.add_constraint(
                LinExpr.var(z) - LinExpr.var(prev_z), "<=", 0.0, name=f"{prefix}_chain{k}"
            )
        prev_z = z
    return cost, delta


# -- allowance and emission ledger ------------------------------------------------

Signal = Union[TimeSeries, Sequence[float], Sequence[LinExpr]]


def _values(s: Signal):
    return s.values if isinstance(s, TimeSeries) else s


def _total(s: Signal, dt: float):
    vals = list(_values(s))
    if vals and isinstance(vals[0], LinExpr):
        return LinExpr.sum(vals) * dt
    return float(np.sum(vals)) * dt


def _same_horizon(*series: Signal) -> None:
    lengths = {len(_values(s)) for s in series}
    if len(lengths) > 1:
        raise ValueError(f"series horizons differ: {sorted(lengths)}")


def allocation_parts(elec_coef: float, heat_coef: float, e2h: float, grid: Signal,
                     chp_elec: Signal, chp_heat: Signal, gb_heat: Signal, dt: float = 1.0):
    """Per-source ``(grid, chp, gb)`` tonnes for one coefficient set.

    Works on numeric series and on per-hour MILP expressions alike.
    """
    _same_horizon(grid, chp_elec, chp_heat, gb_heat)
    g = _total(grid, dt) * elec_coef
    chp = (_total(chp_heat, dt) + _total(chp_elec, dt) * e2h) * heat_coef
    gb = _total(gb_heat, dt) * heat_coef
    return g, chp, gb


def quota(params: CarbonMarketParams, grid: Signal, chp_elec: Signal, chp_heat: Signal,
          gb_heat: Signal, dt: float = 1.0):
    """Free allowance: grid purchase at ``quota_elec``, gas-fired heat at ``quota_heat``."""
    return sum(allocation_parts(params.quota_elec, params.quota_heat, params.e2h_factor,
                                grid, chp_elec, chp_heat, gb_heat, dt), 0.0)


def captured_parts(params: CarbonMarketParams, p2g_elec: Signal, mr_input: Signal, dt: float = 1.0):
    _same_horizon(p2g_elec, mr_input)
    return _total(p2g_elec, dt) * params.capture_p2g, _total(mr_input, dt) * params.capture_mr


@dataclass(frozen=True)
class EmissionLedger:
    quota_total: float
    quota_parts: Dict[str, float] = field(default_factory=dict)
    actual_parts: Dict[str, float] = field(default_factory=dict)
    captured: Dict[str, float] = field(default_factory=dict)
    delta: float = 0.0

    @property
    def actual_total(self) -> float:
        return sum(self.actual_parts.values())

    @property
    def captured_total(self) -> float:
        return sum(self.captured.values())

    def consistency_error(self) -> float:
        return abs(self.delta - (self.actual_total - self.captured_total - self.quota_total))


def net_delta(params: CarbonMarketParams, grid: Signal, chp_elec: Signal, chp_heat: Signal,
              gb_heat: Signal, p2g_elec: Signal, mr_input: Signal, dt: float = 1.0) -> EmissionLedger:
    """Emission ledger: actual emissions minus captured CO2 minus free allowance."""
    _same_horizon(grid, chp_elec, chp_heat, gb_heat, p2g_elec, mr_input)
    q = allocation_parts(params.quota_elec, params.quota_heat, params.e2h_factor,
                         grid, chp_elec, chp_heat, gb_heat, dt)
    a = allocation_parts(params.emis_elec, params.emis_heat, params.e2h_factor,
                         grid, chp_elec, chp_heat, gb_heat, dt)
    cap = captured_parts(params, p2g_elec, mr_input, dt)
    keys = ("grid", "chp", "gb")
    quota_parts = dict(zip(keys, map(float, q)))
    actual_parts = dict(zip(keys, map(float, a)))
    captured = {"p2g": float(cap[0]), "mr": float(cap[1])}
    qt = sum(quota_parts.values())
    delta = sum(actual_parts.values()) - sum(captured.values()) - qt
    return EmissionLedger(qt, quota_parts, actual_parts, captured, delta)


def delta_expression(params: CarbonMarketParams, grid, chp_elec, chp_heat, gb_heat,
                     p2g_elec, mr_input, dt: float = 1.0) -> LinExpr:
    """Net-emission expression over per-hour MILP expressions (same formula as :func:`net_delta`)."""
    q = allocation_parts(params.quota_elec, params.quota_heat, params.e2h_factor,
                         grid, chp_elec, chp_heat, gb_heat, dt)
    a = allocation_parts(params.emis_elec, params.emis_heat, params.e2h_factor,
                         grid, chp_elec, chp_heat, gb_heat, dt)
    cap = captured_parts(params, p2g_elec, mr_input, dt)
    return LinExpr.sum(a) - LinExpr.sum(cap) - LinExpr.sum(q)
