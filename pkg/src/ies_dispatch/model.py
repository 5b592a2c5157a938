"""Domain types shared by every part of the dispatch model.

All gas quantities are energy (MWh of CH4), CO2 bookkeeping is in tonnes, and
every hourly signal is a :class:`TimeSeries`. Instances are immutable; build
variants with :func:`dataclasses.replace`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np


class Unit(str, Enum):
    MW = "MW"
    MWH = "MWh"
    TONNE = "t"
    TONNE_PER_H = "t/h"
    USD_PER_MWH = "$/MWh"
    DIMENSIONLESS = "dimensionless"


NONNEGATIVE_UNITS = {Unit.MW, Unit.MWH, Unit.TONNE, Unit.TONNE_PER_H}


class Mode(str, Enum):
    """Operating modes, each adding one feature to the previous one.

    M1 waste plant with traditional series P2G; M2 refined two-stage P2G with
    fuel cell, hydrogen storage and methanation heat; M3 adds flue-gas heat
    recovery through the heat pump; M4 adds CO2 separation.
    """

    M1 = "M1"
    M2 = "M2"
    M3 = "M3"
    M4 = "M4"

    @classmethod
    def parse(cls, text) -> "Mode":
        if isinstance(text, cls):
            return text
        return cls(str(text).strip().upper())

    @property
    def refined_p2g(self) -> bool:
        return self is not Mode.M1

    @property
    def heat_recovery(self) -> bool:
        return self in (Mode.M3, Mode.M4)

    @property
    def separation(self) -> bool:
        return self is Mode.M4


class Carrier(str, Enum):
    ELECTRIC = "electric"
    HEAT = "heat"
    GAS = "gas"
    HYDROGEN = "hydrogen"


@dataclass(frozen=True)
class TimeSeries:
    values: Tuple[float, ...]
    unit: Unit = Unit.MW
    dt_hours: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "unit", Unit(self.unit))
        object.__setattr__(self, "dt_hours", float(self.dt_hours))

    @classmethod
    def zeros(cls, horizon: int, unit: Unit = Unit.MW, dt_hours: float = 1.0) -> "TimeSeries":
        return cls((0.0,) * horizon, unit, dt_hours)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)

    @property
    def horizon(self) -> int:
        return len(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def total(self) -> float:
        """Time integral (sum of value times step length)."""
        return float(sum(self.values)) * self.dt_hours

    def scaled(self, factor: float) -> "TimeSeries":
        return TimeSeries(tuple(v * factor for v in self.values), self.unit, self.dt_hours)


@dataclass(frozen=True)
class WastePlantParams:
    daily_energy: float  # MWh over the horizon
    p_min: float
    p_max: float
    ramp: float  # MW/h
    flue_heat_per_mwh: float  # MWh flue heat per MWh electric
    co2_per_mwh: float  # t CO2 per MWh electric
    carbon_coeff: float  # $/t
    emis_intensity: float  # t/MWh
    emis_baseline: float  # t/MWh


@dataclass(frozen=True)
class FlueGasParams:
    sep_energy_per_t: float  # MWh electricity per t CO2 separated
    co2_fraction: float
    sep_rate: float
    spray_efficiency: float


@dataclass(frozen=True)
class HeatPumpParams:
    cop: float
    p_max: float
    cop_curve: Optional[Tuple[Tuple[float, float], ...]] = None  # (source temperature degC, cop)

    def __post_init__(self):
        if self.cop_curve is not None:
            object.__setattr__(
                self, "cop_curve", tuple((float(t), float(c)) for t, c in self.cop_curve)
            )

    def cop_at(self, temperature: Optional[float] = None) -> float:
        """COP at a source-water temperature; the constant ``cop`` without a curve."""
        if self.cop_curve is None or temperature is None:
            return self.cop
        temps, cops = zip(*self.cop_curve)
        return float(np.interp(temperature, temps, cops))


@dataclass(frozen=True)
class ConverterParams:
    eta_primary: float
    eta_secondary: float = 0.0
    in_min: float = 0.0
    in_max: float = 0.0
    ramp_up: float = math.inf
    ramp_down: float = math.inf
    ratio_min: Optional[float] = None  # heat/electric output bounds for two-output devices
    ratio_max: Optional[float] = None


@dataclass(frozen=True)
class StorageParams:
    carrier: Carrier
    p_charge_max: float
    p_discharge_max: float
    eta_charge: float
    eta_discharge: float
    soc_min: float
    soc_max: float
    soc_initial: float
    name: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "carrier", Carrier(self.carrier))

    @property
    def label(self) -> str:
        return self.name or f"{self.carrier.value}_storage"


@dataclass(frozen=True)
class CarbonMarketParams:
    base_price: float  # $/t
    interval: float  # t
    growth: float
    quota_elec: float  # t/MWh of grid purchase
    quota_heat: float  # t/MWh of heat (CHP electricity via e2h_factor)
    e2h_factor: float
    capture_p2g: float  # t/MWh of electrolyzer input
    capture_mr: float  # t/MWh of methanation hydrogen input
    emis_elec: float  # actual t/MWh of grid purchase
    emis_heat: float  # actual t/MWh of gas-fired heat


@dataclass(frozen=True)
class TariffParams:
    elec_price: TimeSeries
    gas_price: float
    co2_price: float
    p2g_opex: float
    curtail_wind: float
    curtail_pv: float
    om_wind: float
    om_pv: float
    thermal_cost: float
    co2_per_mwh_gas: float  # t CO2 feedstock per MWh CH4 synthesized


@dataclass(frozen=True)
class Profiles:
    elec_load: TimeSeries
    heat_load: TimeSeries
    gas_load: TimeSeries
    wind_avail: TimeSeries
    pv_avail: TimeSeries

    def items(self):
        return [(name, getattr(self, name)) for name in PROFILE_NAMES]


PROFILE_NAMES = ("elec_load", "heat_load", "gas_load", "wind_avail", "pv_avail")


@dataclass(frozen=True)
class ScenarioConfig:
    horizon: int
    mode: Mode
    profiles: Profiles
    plant: WastePlantParams
    flue: FlueGasParams
    pump: HeatPumpParams
    el: ConverterParams
    mr: ConverterParams
    hfc: Optional[ConverterParams]
    chp: ConverterParams
    gb: ConverterParams
    storages: Tuple[StorageParams, ...]
    carbon: CarbonMarketParams
    tariffs: TariffParams
    grid_import_max: float
    gas_import_max: float
    thermal_min: float
    thermal_max: float
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "storages", tuple(self.storages))

    @property
    def dt(self) -> float:
        return self.profiles.elec_load.dt_hours

    def active_storages(self) -> Tuple[StorageParams, ...]:
        """Storages present in this mode; traditional P2G has no hydrogen buffer."""
        if self.mode.refined_p2g:
            return self.storages
        return tuple(s for s in self.storages if s.carrier is not Carrier.HYDROGEN)


# -- validation ----------------------------------------------------------------


def _finite(v) -> bool:
    return v is not None and isinstance(v, (int, float)) and math.isfinite(v)


def _check_series(path: str, ts: TimeSeries, horizon: int, dt: float, out: List[str],
                  allow_negative: bool = False) -> None:
    if len(ts) != horizon:
        out.append(f"{path}: length {len(ts)} does not match horizon {horizon}")
    if not all(math.isfinite(v) for v in ts.values):
        out.append(f"{path}: contains non-finite values")
    elif not allow_negative and ts.unit in NONNEGATIVE_UNITS and any(v < 0 for v in ts.values):
        out.append(f"{path}: negative values for a non-negative quantity ({ts.unit.value})")
    if ts.dt_hours != dt:
        out.append(f"{path}: dt_hours {ts.dt_hours} differs from scenario step {dt}")


def _check_converter(path: str, p: ConverterParams, two_outputs: bool, out: List[str]) -> None:
    if not 0 < p.eta_primary <= 1:
        out.append(f"{path}.eta_primary: {p.eta_primary} outside (0, 1]")
    if not 0 <= p.eta_secondary <= 1:
        out.append(f"{path}.eta_secondary: {p.eta_secondary} outside [0, 1]")
    if p.eta_primary + p.eta_secondary > 1.1:
        out.append(f"{path}: combined efficiency {p.eta_primary + p.eta_secondary:g} exceeds 1.1")
    if not 0 <= p.in_min <= p.in_max:
        out.append(f"{path}: input bounds require 0 <= in_min ({p.in_min}) <= in_max ({p.in_max})")
    if not (p.ramp_up > 0 and p.ramp_down > 0):
        out.append(f"{path}: ramp limits must be positive")
    has_ratio = p.ratio_min is not None or p.ratio_max is not None
    if has_ratio and not two_outputs:
        out.append(f"{path}: ratio bounds given for a single-output device")
    if has_ratio and two_outputs:
        rmin = p.ratio_min if p.ratio_min is not None else 0.0
        rmax = p.ratio_max if p.ratio_max is not None else math.inf
        if rmin > rmax:
            out.append(f"{path}: ratio_min ({rmin}) exceeds ratio_max ({rmax})")
        elif p.eta_primary > 0:
            fixed = p.eta_secondary / p.eta_primary
            if not rmin - 1e-12 <= fixed <= rmax + 1e-12:
                out.append(
                    f"{path}: output ratio {fixed:g} from efficiencies lies outside "
                    f"[{rmin:g}, {rmax:g}], which forces the unit off"
                )


def validate(config: ScenarioConfig) -> List[str]:
    """Every invariant violation as ``"<field path>: <problem>"``; empty when valid."""
    out: List[str] = []
    T = config.horizon
    if not isinstance(T, int) or T < 1:
        out.append(f"horizon: must be a positive integer, got {T!r}")
        return out
    dt = config.dt
    if not dt > 0:
        out.append(f"profiles.elec_load.dt_hours: must be positive, got {dt}")
    for name, ts in config.profiles.items():
        _check_series(f"profiles.{name}", ts, T, dt, out)
    _check_series("tariffs.elec_price", config.tariffs.elec_price, T, dt, out, allow_negative=True)

    p = config.plant
    if not 0 <= p.p_min <= p.p_max:
        out.append(f"plant: bounds require 0 <= p_min ({p.p_min}) <= p_max ({p.p_max})")
    if not p.ramp > 0:
        out.append(f"plant.ramp: must be positive, got {p.ramp}")
    if not T * p.p_min * dt <= p.daily_energy <= T * p.p_max * dt:
        out.append(
            f"plant.daily_energy: daily energy infeasible, {p.daily_energy} MWh outside "
            f"[{T * p.p_min * dt:g}, {T * p.p_max * dt:g}]"
        )
    if not p.emis_intensity >= p.emis_baseline >= 0:
        out.append(
            f"plant: emission coefficients require emis_intensity ({p.emis_intensity}) >= "
            f"emis_baseline ({p.emis_baseline}) >= 0"
        )
    for fname in ("flue_heat_per_mwh", "co2_per_mwh", "carbon_coeff"):
        if getattr(p, fname) < 0:
            out.append(f"plant.{fname}: must be non-negative")

    f = config.flue
    for fname in ("co2_fraction", "sep_rate", "spray_efficiency"):
        v = getattr(f, fname)
        if not 0 < v <= 1:
            out.append(f"flue.{fname}: {v} outside (0, 1]")
    if f.sep_energy_per_t < 0:
        out.append("flue.sep_energy_per_t: must be non-negative")

    hp = config.pump
    if not hp.cop > 1:
        out.append(f"pump.cop: must exceed 1, got {hp.cop}")
    if hp.p_max < 0:
        out.append("pump.p_max: must be non-negative")
    if hp.cop_curve is not None:
        temps = [t for t, _ in hp.cop_curve]
        if any(b <= a for a, b in zip(temps, temps[1:])):
            out.append("pump.cop_curve: temperatures must be strictly increasing")

    _check_converter("el", config.el, False, out)
    _check_converter("mr", config.mr, False, out)
    if config.hfc is not None:
        _check_converter("hfc", config.hfc, True, out)
    elif config.mode.refined_p2g:
        out.append(f"hfc: required in mode {config.mode.value} (fuel cell present)")
    _check_converter("chp", config.chp, True, out)
    _check_converter("gb", config.gb, False, out)

    seen = set()
    for i, s in enumerate(config.storages):
        path = f"storages[{i}]"
        if s.label in seen:
            out.append(f"{path}.name: duplicate storage label {s.label!r}")
        seen.add(s.label)
        if not 0 <= s.soc_min <= s.soc_initial <= s.soc_max:
            out.append(
                f"{path}: state of charge requires 0 <= soc_min ({s.soc_min}) <= "
                f"soc_initial ({s.soc_initial}) <= soc_max ({s.soc_max})"
            )
        for fname in ("eta_charge", "eta_discharge"):
            v = getattr(s, fname)
            if not 0 < v <= 1:
                out.append(f"{path}.{fname}: {v} outside (0, 1]")
        for fname in ("p_charge_max", "p_discharge_max"):
            if getattr(s, fname) < 0:
                out.append(f"{path}.{fname}: must be non-negative")

    c = config.carbon
    if c.base_price < 0:
        out.append("carbon.base_price: must be non-negative")
    if not c.interval > 0:
        out.append("carbon.interval: must be positive")
    if c.growth < 0:
        out.append("carbon.growth: must be non-negative")
    for fname in ("quota_elec", "quota_heat", "e2h_factor", "capture_p2g", "capture_mr",
                  "emis_elec", "emis_heat"):
        if getattr(c, fname) < 0:
            out.append(f"carbon.{fname}: must be non-negative")

    tf = config.tariffs
    for fname in ("gas_price", "co2_price", "p2g_opex", "curtail_wind", "curtail_pv",
                  "om_wind", "om_pv", "thermal_cost", "co2_per_mwh_gas"):
        if getattr(tf, fname) < 0:
            out.append(f"tariffs.{fname}: must be non-negative")

    for fname in ("grid_import_max", "gas_import_max"):
        if getattr(config, fname) < 0:
            out.append(f"{fname}: must be non-negative")
    if not 0 <= config.thermal_min <= config.thermal_max:
        out.append(
            f"thermal: bounds require 0 <= thermal_min ({config.thermal_min}) <= "
            f"thermal_max ({config.thermal_max})"
        )
    return out


def all_series(config: ScenarioConfig) -> Sequence[TimeSeries]:
    return [ts for _, ts in config.profiles.items()] + [config.tariffs.elec_price]
