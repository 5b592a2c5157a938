"""Device builders: each physical unit becomes hourly variables and linear rows.

A builder appends to a :class:`MilpProblem` and returns a :class:`DeviceBlock`
naming its per-hour variables (``var_handles``), derived affine outputs
(``expressions``) and the rows it added, grouped under tags. Ramp limits are
per time step between consecutive hours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .milp import LinExpr, MilpProblem
from .model import (
    ConverterParams,
    FlueGasParams,
    HeatPumpParams,
    Mode,
    ScenarioConfig,
    StorageParams,
    WastePlantParams,
)

# recoverable methanation heat per MWh of electrolysis electricity
METHANATION_HEAT_RATIO = 0.1188

CONVERTERS = ("EL", "MR", "HFC", "CHP", "GB")
TWO_OUTPUT = {"HFC", "CHP"}


@dataclass
class DeviceBlock:
    name: str
    horizon: int
    var_handles: Dict[str, List[int]] = field(default_factory=dict)
    expressions: Dict[str, List[LinExpr]] = field(default_factory=dict)
    constraint_tags: List[Tuple[str, List[int]]] = field(default_factory=list)

    def add_signal(self, role: str, indices: Sequence[int]) -> List[int]:
        if role in self.var_handles or role in self.expressions:
            raise ValueError(f"{self.name}: duplicate signal {role!r}")
        if len(indices) != self.horizon:
            raise ValueError(f"{self.name}.{role}: expected {self.horizon} variables")
        self.var_handles[role] = list(indices)
        return self.var_handles[role]

    def add_expression(self, role: str, exprs: Sequence[LinExpr]) -> None:
        if role in self.var_handles or role in self.expressions:
            raise ValueError(f"{self.name}: duplicate signal {role!r}")
        self.expressions[role] = list(exprs)

    def tag(self, tag: str, rows: Sequence[int]) -> None:
        if any(t == tag for t, _ in self.constraint_tags):
            raise ValueError(f"{self.name}: duplicate constraint tag {tag!r}")
        self.constraint_tags.append((tag, list(rows)))

    def signal(self, role: str) -> List[LinExpr]:
        """Per-hour expressions for a variable or derived signal."""
        if role in self.var_handles:
            return [LinExpr.var(i) for i in self.var_handles[role]]
        return self.expressions[role]

    def roles(self) -> List[str]:
        return list(self.var_handles) + list(self.expressions)

    def rows(self, tag: str) -> List[int]:
        return next(r for t, r in self.constraint_tags if t == tag)

    @property
    def num_vars(self) -> int:
        return sum(len(v) for v in self.var_handles.values())

    @property
    def num_constraints(self) -> int:
        return sum(len(r) for _, r in self.constraint_tags)


def _ramp_rows(problem: MilpProblem, prefix: str, idx: List[int], up: float, down: float) -> List[int]:
    rows = []
    for t in range(1, len(idx)):
        step = LinExpr.var(idx[t]) - LinExpr.var(idx[t - 1])
        if math.isfinite(up):
            rows.append(problem.add_constraint(step, "<=", up, name=f"{prefix}_ramp_up_t{t:02d}"))
        if math.isfinite(down):
            rows.append(problem.add_constraint(step, ">=", -down, name=f"{prefix}_ramp_dn_t{t:02d}"))
    return rows


def build_waste_plant(params: WastePlantParams, problem: MilpProblem, horizon: int = 24,
                      dt: float = 1.0) -> DeviceBlock:
    """Fixed daily energy, output bounds and ramping; exposes flue heat and raw CO2."""
    lo_e, hi_e = horizon * params.p_min * dt, horizon * params.p_max * dt
    if not lo_e - 1e-9 <= params.daily_energy <= hi_e + 1e-9:
        raise ValueError(
            f"waste plant daily energy {params.daily_energy} MWh outside [{lo_e:g}, {hi_e:g}]"
        )
    block = DeviceBlock("wi", horizon)
    p = block.add_signal("wi_power", problem.add_vars("wi_power", horizon, params.p_min, params.p_max))
    total = LinExpr.sum(LinExpr.var(i, dt) for i in p)
    block.tag("daily_energy", [problem.add_constraint(total, "=", params.daily_energy, name="wi_daily_energy")])
    block.tag("ramp", _ramp_rows(problem, "wi", p, params.ramp, params.ramp))
    block.add_expression("flue_heat", [LinExpr.var(i, params.flue_heat_per_mwh) for i in p])
    block.add_expression("raw_co2", [LinExpr.var(i, params.co2_per_mwh) for i in p])
    return block


def build_flue_chain(flue: FlueGasParams, pump: HeatPumpParams, plant_block: DeviceBlock,
                     mode: Mode, problem: MilpProblem) -> DeviceBlock:
    """Heat pump on the spray-tower water (M3, M4) and CO2 separation (M4 only)."""
    T = plant_block.horizon
    block = DeviceBlock("flue", T)
    if mode.heat_recovery:
        cop = pump.cop_at()
        hp = block.add_signal("hp_elec", problem.add_vars("hp_elec", T, 0.0, pump.p_max))
        heat = [LinExpr.var(i, cop) for i in hp]
        block.add_expression("hp_heat", heat)
        flue_heat = plant_block.signal("flue_heat")
        block.tag("spray_cap", [
            problem.add_constraint(heat[t] - flue_heat[t] * flue.spray_efficiency, "<=", 0.0,
                                   name=f"hp_source_t{t:02d}")
            for t in range(T)
        ])
    if mode.separation:
        raw = plant_block.signal("raw_co2")
        cap = block.add_signal("co2_capture", problem.add_vars("co2_capture", T, 0.0, math.inf))
        share = flue.co2_fraction * flue.sep_rate
        block.tag("capture_cap", [
            problem.add_constraint(LinExpr.var(cap[t]) - raw[t] * share, "<=", 0.0,
                                   name=f"co2_capture_cap_t{t:02d}")
            for t in range(T)
        ])
        block.add_expression("sep_elec", [LinExpr.var(i, flue.sep_energy_per_t) for i in cap])
    return block


def build_converter(name: str, params: ConverterParams, problem: MilpProblem, horizon: int = 24,
                    eta_el: Optional[float] = None) -> DeviceBlock:
    """One conversion unit with bounded, ramp-limited input and linear outputs.

    EL: electricity to hydrogen. MR: hydrogen to gas, plus recovered reaction
    heat referenced to the electrolysis electricity ``input / eta_el``. HFC and
    CHP: two outputs (electric, heat) with ratio bounds. GB: gas to heat.
    """
    key = name.upper()
    if key not in CONVERTERS:
        raise ValueError(f"unknown converter {name!r}; expected one of {', '.join(CONVERTERS)}")
    has_ratio = params.ratio_min is not None or params.ratio_max is not None
    if has_ratio and key not in TWO_OUTPUT:
        raise ValueError(f"{key}: ratio bounds given for a single-output device")
    if key == "MR" and not (eta_el and eta_el > 0):
        raise ValueError("MR: methanation heat needs the electrolyzer efficiency")
    low = key.lower()
    block = DeviceBlock(low, horizon)
    x = block.add_signal(f"{low}_input", problem.add_vars(f"{low}_input", horizon, params.in_min, params.in_max))
    block.tag("ramp", _ramp_rows(problem, low, x, params.ramp_up, params.ramp_down))

    def out(coef):
        return [LinExpr.var(i, coef) for i in x]

    if key == "EL":
        block.add_expression("el_h2_out", out(params.eta_primary))
    elif key == "MR":
        block.add_expression("mr_gas_out", out(params.eta_primary))
        block.add_expression("mr_heat_out", out(METHANATION_HEAT_RATIO / eta_el))
    elif key == "GB":
        block.add_expression("gb_heat_out", out(params.eta_primary))
    else:
        block.add_expression(f"{low}_elec_out", out(params.eta_primary))
        block.add_expression(f"{low}_heat_out", out(params.eta_secondary))
        rows = []
        # heat = eta_s*in and elec = eta_p*in, so each bound is one coefficient per hour;
        # a coefficient of zero means the bound holds identically and needs no row
        for rel, r, label in ((">=", params.ratio_min, "min"), ("<=", params.ratio_max, "max")):
            if r is None:
                continue
            coef = params.eta_secondary - r * params.eta_primary
            if abs(coef) <= 1e-12:
                continue
            rows += [problem.add_constraint(LinExpr.var(i, coef), rel, 0.0,
                                            name=f"{low}_ratio_{label}_t{t:02d}")
                     for t, i in enumerate(x)]
        block.tag("ratio", rows)
    return block


def build_storage(params: StorageParams, problem: MilpProblem, horizon: int = 24,
                  dt: float = 1.0) -> DeviceBlock:
    """Charge/discharge with one mode binary per hour and a cyclic state of charge.

    ``mode_t = 1`` allows charging and ``0`` allows discharging, which is the
    same as two flags with ``charging + discharging <= 1``. ``soc_t`` is the
    state at the end of hour ``t`` and the final state returns to the initial one.
    """
    lab = params.label
    block = DeviceBlock(lab, horizon)
    ch = block.add_signal(f"{lab}_charge", problem.add_vars(f"{lab}_charge", horizon, 0.0, params.p_charge_max))
    dis = block.add_signal(f"{lab}_discharge",
                           problem.add_vars(f"{lab}_discharge", horizon, 0.0, params.p_discharge_max))
    mode = block.add_signal(f"{lab}_mode", problem.add_vars(f"{lab}_mode", horizon, 0.0, 1.0, binary=True))
    soc = block.add_signal(f"{lab}_soc", problem.add_vars(f"{lab}_soc", horizon, params.soc_min, params.soc_max))
    excl = []
    for t in range(horizon):
        excl.append(problem.add_constraint(
            LinExpr.var(ch[t]) - LinExpr.var(mode[t], params.p_charge_max), "<=", 0.0,
            name=f"{lab}_charge_gate_t{t:02d}"))
        excl.append(problem.add_constraint(
            LinExpr.var(dis[t]) + LinExpr.var(mode[t], params.p_discharge_max), "<=",
            params.p_discharge_max, name=f"{lab}_discharge_gate_t{t:02d}"))
    block.tag("exclusivity", excl)
    dyn = []
    for t in range(horizon):
        prev = LinExpr.var(soc[t - 1]) if t else LinExpr.const(params.soc_initial)
        flow = LinExpr.var(ch[t], params.eta_charge * dt) - LinExpr.var(dis[t], dt / params.eta_discharge)
        dyn.append(problem.add_constraint(LinExpr.var(soc[t]) - prev - flow, "=", 0.0,
                                          name=f"{lab}_soc_t{t:02d}"))
    block.tag("soc_dynamics", dyn)
    block.tag("cyclic", [problem.add_constraint(LinExpr.var(soc[-1]), "=", params.soc_initial,
                                                name=f"{lab}_cyclic")])
    return block


def build_renewables_and_grid(config: ScenarioConfig, problem: MilpProblem) -> DeviceBlock:
    """Wind/PV dispatch under availability, thermal unit, grid and gas purchases."""
    T = config.horizon
    prof = config.profiles
    block = DeviceBlock("supply", T)
    wind = block.add_signal("wind", problem.add_vars("wind", T, 0.0, prof.wind_avail.values))
    pv = block.add_signal("pv", problem.add_vars("pv", T, 0.0, prof.pv_avail.values))
    block.add_expression("wind_curtail", [LinExpr.const(a) - LinExpr.var(i)
                                          for a, i in zip(prof.wind_avail.values, wind)])
    block.add_expression("pv_curtail", [LinExpr.const(a) - LinExpr.var(i)
                                        for a, i in zip(prof.pv_avail.values, pv)])
    block.add_signal("thermal", problem.add_vars("thermal", T, config.thermal_min, config.thermal_max))
    block.add_signal("grid", problem.add_vars("grid", T, 0.0, config.grid_import_max))
    block.add_signal("gas_buy", problem.add_vars("gas_buy", T, 0.0, config.gas_import_max))
    return block
