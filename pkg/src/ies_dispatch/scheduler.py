"""Scenario assembly, solve and solution extraction.

``assemble`` wires the device blocks into four hourly balances (electric,
heat, gas, hydrogen), ties the carbon ledger to the stepped cost and sets the
objective. ``optimize`` solves, re-evaluates every cost term from the primal
schedule through :func:`evaluate_costs` and checks it against the solver's
objective. Infeasible scenarios are re-solved with penalized balance slacks to
name the first balance that cannot close.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import carbon, devices
from .carbon import EmissionLedger, LadderSpec
from .milp import LinExpr, MilpOptions, MilpProblem, SolveReport, SolveStatus, solve
from .model import Carrier, ScenarioConfig, TimeSeries, Unit, validate

ELASTIC_PENALTY = 1e6  # $/MWh of balance slack
CARRIERS = (Carrier.ELECTRIC, Carrier.HEAT, Carrier.GAS, Carrier.HYDROGEN)
COST_FIELDS = ("purchase", "carbon_ladder", "wi_penalty", "p2g", "curtailment", "renewables_om", "thermal")


class ScenarioInvalid(ValueError):
    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.violations))


class AuditError(RuntimeError):
    """Closed-form cost re-evaluation disagrees with the solver objective."""


@dataclass(frozen=True)
class CostBreakdown:
    purchase: float
    carbon_ladder: float
    wi_penalty: float
    p2g: float
    curtailment: float
    renewables_om: float
    thermal: float
    total: float

    @classmethod
    def from_parts(cls, **parts: float) -> "CostBreakdown":
        vals = {k: float(parts[k]) for k in COST_FIELDS}
        return cls(total=math.fsum(vals.values()), **vals)

    def parts(self) -> Dict[str, float]:
        return {k: getattr(self, k) for k in COST_FIELDS}


@dataclass
class Diagnosis:
    """First balance that needs slack in the elastic re-solve (``None`` if none do)."""

    balance: Optional[str]
    hour: Optional[int]
    shortfall: float
    message: str


@dataclass
class DispatchSolution:
    mode: str
    status: SolveStatus
    objective: float
    schedules: Dict[str, TimeSeries] = field(default_factory=dict)
    ledger: Optional[EmissionLedger] = None
    costs: Optional[CostBreakdown] = None
    report: Optional[SolveReport] = None
    carbon_cost_var: float = math.nan
    diagnosis: Optional[Diagnosis] = None

    @property
    def ok(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    def series(self, name: str) -> np.ndarray:
        return self.schedules[name].array


@dataclass
class Assembly:
    config: ScenarioConfig
    problem: MilpProblem
    blocks: Dict[str, devices.DeviceBlock]
    signals: Dict[str, List[LinExpr]]
    balance_rows: Dict[str, List[int]]
    cost_terms: Dict[str, LinExpr]
    ladder: Tuple[int, int]
    delta_bounds: Tuple[float, float]
    slacks: Dict[str, Tuple[List[int], List[int]]] = field(default_factory=dict)


def _zeros(T: int) -> List[LinExpr]:
    return [LinExpr() for _ in range(T)]


def _expr_bounds(expr: LinExpr, problem: MilpProblem) -> Tuple[float, float]:
    lo = hi = expr.constant
    for k, c in expr.terms.items():
        v = problem.variables[k]
        a, b = c * v.lower, c * v.upper
        lo += min(a, b)
        hi += max(a, b)
    return lo, hi


def build(config: ScenarioConfig, elastic: bool = False, all_ladder_binaries: bool = False) -> Assembly:
    """Full model with handles; ``elastic`` adds penalized slacks to every balance."""
    T, dt, mode = config.horizon, config.dt, config.mode
    if mode.refined_p2g and config.hfc is None:
        raise ValueError(f"mode {mode.value} needs fuel cell parameters (hfc)")
    problem = MilpProblem(name=f"{config.name}_{mode.value.lower()}")
    blocks: Dict[str, devices.DeviceBlock] = {}
    wi = devices.build_waste_plant(config.plant, problem, T, dt)
    blocks["wi"] = wi
    blocks["supply"] = devices.build_renewables_and_grid(config, problem)
    blocks["el"] = devices.build_converter("EL", config.el, problem, T)
    blocks["mr"] = devices.build_converter("MR", config.mr, problem, T, eta_el=config.el.eta_primary)
    if mode.refined_p2g:
        blocks["hfc"] = devices.build_converter("HFC", config.hfc, problem, T)
    blocks["chp"] = devices.build_converter("CHP", config.chp, problem, T)
    blocks["gb"] = devices.build_converter("GB", config.gb, problem, T)
    blocks["flue"] = devices.build_flue_chain(config.flue, config.pump, wi, mode, problem)
    storages = config.active_storages()
    for s in storages:
        blocks[s.label] = devices.build_storage(s, problem, T, dt)

    sig: Dict[str, List[LinExpr]] = {}
    for b in blocks.values():
        for role in b.roles():
            sig[role] = b.signal(role)

    def get(role):
        return sig.get(role) or _zeros(T)

    # CO2 feedstock for methanation: bought, or routed from the separation unit
    co2_demand = [e * config.tariffs.co2_per_mwh_gas for e in sig["mr_gas_out"]]
    if mode.separation:
        route = blocks["flue"].add_signal("co2_route", problem.add_vars("co2_route", T, 0.0, math.inf))
        rows = []
        for t, i in enumerate(route):
            rows.append(problem.add_constraint(LinExpr.var(i) - sig["co2_capture"][t], "<=", 0.0,
                                               name=f"co2_route_cap_t{t:02d}"))
            rows.append(problem.add_constraint(LinExpr.var(i) - co2_demand[t], "<=", 0.0,
                                               name=f"co2_route_need_t{t:02d}"))
        blocks["flue"].tag("route", rows)
        sig["co2_route"] = blocks["flue"].signal("co2_route")
    co2_buy = [d - r for d, r in zip(co2_demand, get("co2_route"))]

    def storage_net(carrier: Carrier) -> List[LinExpr]:
        out = _zeros(T)
        for s in storages:
            if s.carrier is carrier:
                out = [o + d - c for o, d, c in zip(out, sig[f"{s.label}_discharge"], sig[f"{s.label}_charge"])]
        return out

    prof = config.profiles
    mr_heat = sig["mr_heat_out"] if mode.refined_p2g else _zeros(T)
    net = {
        Carrier.ELECTRIC: [
            sum((get(k)[t] for k in ("grid", "wind", "pv", "wi_power", "chp_elec_out", "hfc_elec_out", "thermal")),
                LinExpr())
            - get("el_input")[t] - get("hp_elec")[t] - get("sep_elec")[t] - prof.elec_load.values[t]
            for t in range(T)
        ],
        Carrier.HEAT: [
            get("hfc_heat_out")[t] + mr_heat[t] + get("chp_heat_out")[t] + get("gb_heat_out")[t]
            + get("hp_heat")[t] - prof.heat_load.values[t]
            for t in range(T)
        ],
        Carrier.GAS: [
            get("gas_buy")[t] + get("mr_gas_out")[t] - get("chp_input")[t] - get("gb_input")[t]
            - prof.gas_load.values[t]
            for t in range(T)
        ],
        Carrier.HYDROGEN: [
            get("el_h2_out")[t] - get("mr_input")[t] - get("hfc_input")[t]
            for t in range(T)
        ],
    }
    balance_rows: Dict[str, List[int]] = {}
    slacks: Dict[str, Tuple[List[int], List[int]]] = {}
    for carrier in CARRIERS:
        key = carrier.value
        exprs = [n + s for n, s in zip(net[carrier], storage_net(carrier))]
        if elastic:
            up = problem.add_vars(f"slack_{key}_up", T)
            dn = problem.add_vars(f"slack_{key}_dn", T)
            slacks[key] = (up, dn)
            exprs = [e + LinExpr.var(u) - LinExpr.var(d) for e, u, d in zip(exprs, up, dn)]
            problem.add_objective(LinExpr.sum(LinExpr.var(i) for i in up + dn), ELASTIC_PENALTY * dt)
        balance_rows[key] = [
            problem.add_constraint(e, "=", 0.0, name=f"balance_{key}_t{t:02d}") for t, e in enumerate(exprs)
        ]

    # carbon ledger and stepped cost
    cm = config.carbon
    delta_expr = carbon.delta_expression(cm, get("grid"), get("chp_elec_out"), get("chp_heat_out"),
                                         get("gb_heat_out"), get("el_input"), get("mr_input"), dt)
    lo, hi = _expr_bounds(delta_expr, problem)
    if hi - lo < 1e-6:
        lo, hi = lo - 1.0, hi + 1.0
    ladder = carbon.linearize_ladder(LadderSpec.from_market(cm), (lo, hi), problem,
                                     all_binaries=all_ladder_binaries)
    problem.add_constraint(LinExpr.var(ladder[1]) - delta_expr, "=", 0.0, name="carbon_delta_link")

    tf, pl = config.tariffs, config.plant

    def total(series, coef=1.0):
        return LinExpr.sum(series) * (coef * dt)

    price = tf.elec_price.values
    terms = {
        "purchase": LinExpr.sum(g * (p * dt) for g, p in zip(get("grid"), price))
        + total(get("gas_buy"), tf.gas_price),
        "carbon_ladder": LinExpr.var(ladder[0]),
        "wi_penalty": total(get("wi_power"), pl.carbon_coeff * (pl.emis_intensity - pl.emis_baseline)),
        "p2g": total(co2_buy, tf.co2_price) + total(get("el_input"), tf.p2g_opex),
        "curtailment": total(get("wind_curtail"), tf.curtail_wind) + total(get("pv_curtail"), tf.curtail_pv),
        "renewables_om": total(get("wind"), tf.om_wind) + total(get("pv"), tf.om_pv),
        "thermal": total(get("thermal"), tf.thermal_cost),
    }
    for expr in terms.values():
        problem.add_objective(expr)
    return Assembly(config, problem, blocks, sig, balance_rows, terms, ladder, (lo, hi), slacks)


def assemble(config: ScenarioConfig) -> MilpProblem:
    return build(config).problem


# -- evaluation ---------------------------------------------------------------------

PRIMARY_SIGNALS = ("grid", "gas_buy", "wi_power", "el_input", "mr_input", "chp_input", "gb_input",
                   "wind", "pv", "thermal")


def _arr(schedules: Mapping[str, object], name: str, T: int, required: bool = True) -> np.ndarray:
    if name not in schedules:
        if required:
            raise KeyError(name)
        return np.zeros(T)
    v = schedules[name]
    return np.asarray(v.values if isinstance(v, TimeSeries) else v, dtype=float)


def _check_signals(schedules: Mapping[str, object], names: Sequence[str]) -> None:
    missing = [n for n in names if n not in schedules]
    if missing:
        raise ValueError(f"missing schedule signals: {', '.join(missing)}")


def ledger_from_schedules(config: ScenarioConfig, schedules: Mapping[str, object]) -> EmissionLedger:
    _check_signals(schedules, ("grid", "chp_input", "gb_input", "el_input", "mr_input"))
    T, dt = config.horizon, config.dt
    chp_in = _arr(schedules, "chp_input", T)
    return carbon.net_delta(
        config.carbon,
        _arr(schedules, "grid", T),
        chp_in * config.chp.eta_primary,
        chp_in * config.chp.eta_secondary,
        _arr(schedules, "gb_input", T) * config.gb.eta_primary,
        _arr(schedules, "el_input", T),
        _arr(schedules, "mr_input", T),
        dt,
    )


def evaluate_costs(config: ScenarioConfig, schedules: Mapping[str, object]) -> CostBreakdown:
    """Closed-form cost of a schedule, from the primary decision signals only."""
    _check_signals(schedules, PRIMARY_SIGNALS)
    T, dt = config.horizon, config.dt
    tf, pl, prof = config.tariffs, config.plant, config.profiles
    a = {n: _arr(schedules, n, T) for n in PRIMARY_SIGNALS}
    route = _arr(schedules, "co2_route", T, required=False)
    mr_gas = a["mr_input"] * config.mr.eta_primary
    co2_buy = np.maximum(0.0, tf.co2_per_mwh_gas * mr_gas - route)
    ledger = ledger_from_schedules(config, schedules)
    return CostBreakdown.from_parts(
        purchase=dt * (float(np.dot(tf.elec_price.array, a["grid"])) + tf.gas_price * a["gas_buy"].sum()),
        carbon_ladder=carbon.ladder_cost(LadderSpec.from_market(config.carbon), ledger.delta),
        wi_penalty=dt * pl.carbon_coeff * (pl.emis_intensity - pl.emis_baseline) * a["wi_power"].sum(),
        p2g=dt * (tf.co2_price * co2_buy.sum() + tf.p2g_opex * a["el_input"].sum()),
        curtailment=dt * (tf.curtail_wind * (prof.wind_avail.array - a["wind"]).sum()
                          + tf.curtail_pv * (prof.pv_avail.array - a["pv"]).sum()),
        renewables_om=dt * (tf.om_wind * a["wind"].sum() + tf.om_pv * a["pv"].sum()),
        thermal=dt * tf.thermal_cost * a["thermal"].sum(),
    )


def balance_residuals(config: ScenarioConfig, schedules: Mapping[str, object]) -> Dict[str, np.ndarray]:
    """Hourly supply minus demand per carrier, rebuilt from device inputs and parameters."""
    T, mode = config.horizon, config.mode
    _check_signals(schedules, PRIMARY_SIGNALS)
    s = {n: _arr(schedules, n, T, required=False) for n in
         PRIMARY_SIGNALS + ("hfc_input", "hp_elec", "co2_capture")}
    prof = config.profiles
    el_h2 = s["el_input"] * config.el.eta_primary
    hfc = config.hfc if mode.refined_p2g else None
    hfc_e = s["hfc_input"] * (hfc.eta_primary if hfc else 0.0)
    hfc_h = s["hfc_input"] * (hfc.eta_secondary if hfc else 0.0)
    mr_heat = s["mr_input"] * devices.METHANATION_HEAT_RATIO / config.el.eta_primary if mode.refined_p2g else 0.0
    store = {c.value: np.zeros(T) for c in CARRIERS}
    for st in config.active_storages():
        store[st.carrier.value] += _arr(schedules, f"{st.label}_discharge", T) - _arr(schedules, f"{st.label}_charge", T)
    sep = s["co2_capture"] * config.flue.sep_energy_per_t
    elec = (s["grid"] + s["wind"] + s["pv"] + s["wi_power"] + s["chp_input"] * config.chp.eta_primary
            + hfc_e + s["thermal"] - s["el_input"] - s["hp_elec"] - sep - prof.elec_load.array)
    heat = (hfc_h + mr_heat + s["chp_input"] * config.chp.eta_secondary + s["gb_input"] * config.gb.eta_primary
            + s["hp_elec"] * config.pump.cop_at() - prof.heat_load.array)
    gas = (s["gas_buy"] + s["mr_input"] * config.mr.eta_primary - s["chp_input"] - s["gb_input"]
           - prof.gas_load.array)
    h2 = el_h2 - s["mr_input"] - s["hfc_input"]
    raw = {"electric": elec, "heat": heat, "gas": gas, "hydrogen": h2}
    return {k: raw[k] + store[k] for k in raw}


# -- solve ---------------------------------------------------------------------------

def _unit_for(role: str) -> Unit:
    if role.endswith("_soc"):
        return Unit.MWH
    if role.endswith("_mode"):
        return Unit.DIMENSIONLESS
    if role.startswith("co2_") or role == "raw_co2":
        return Unit.TONNE_PER_H
    return Unit.MW


def extract_schedules(asm: Assembly, x: np.ndarray) -> Dict[str, TimeSeries]:
    dt = asm.config.dt
    out = {}
    for role in sorted(asm.signals):
        vals = tuple(float(e.value(x)) for e in asm.signals[role])
        out[role] = TimeSeries(vals, _unit_for(role), dt)
    return out


def diagnose(config: ScenarioConfig, options: Optional[MilpOptions] = None,
             backend: Optional[str] = None) -> Diagnosis:
    """Elastic re-solve: report the earliest hour and balance that needs slack."""
    asm = build(config, elastic=True)
    rep = solve(asm.problem.relaxed(), options, backend)
    if rep.x is None:
        return Diagnosis(None, None, math.nan,
                         "infeasible even with free balances: device limits conflict "
                         "(e.g. daily plant energy versus ramp or storage cycle limits)")
    worst = None
    for t in range(config.horizon):
        for key, (up, dn) in asm.slacks.items():
            amount = rep.x[up[t]] - rep.x[dn[t]]
            if abs(amount) > 1e-6:
                worst = (key, t, float(amount))
                break
        if worst:
            break
    if worst is None:
        return Diagnosis(None, None, 0.0, "balances close without slack; infeasibility lies in integrality")
    key, t, amount = worst
    what = "shortfall" if amount > 0 else "surplus"
    return Diagnosis(key, t, abs(amount),
                     f"{key} balance cannot close at hour {t}: {what} of {abs(amount):.6g} MW")


def optimize(config: ScenarioConfig, options: Optional[MilpOptions] = None,
             backend: Optional[str] = None, audit: bool = True) -> DispatchSolution:
    violations = validate(config)
    if violations:
        raise ScenarioInvalid(violations)
    asm = build(config)
    rep = solve(asm.problem, options, backend)
    sol = DispatchSolution(config.mode.value, rep.status, rep.objective, report=rep)
    if rep.status is SolveStatus.INFEASIBLE:
        sol.diagnosis = diagnose(config, options, backend)
        return sol
    if rep.x is None:
        return sol
    x = np.asarray(rep.x, dtype=float)
    sol.schedules = extract_schedules(asm, x)
    sol.ledger = ledger_from_schedules(config, sol.schedules)
    sol.costs = evaluate_costs(config, sol.schedules)
    sol.carbon_cost_var = float(x[asm.ladder[0]])
    if audit:
        tol = 1e-6 * max(1.0, abs(sol.costs.total))
        if abs(sol.costs.total - rep.objective) > tol:
            raise AuditError(
                f"cost audit failed: solver objective {rep.objective!r} vs re-evaluated {sol.costs.total!r}"
            )
    return sol
