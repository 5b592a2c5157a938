import dataclasses
import itertools

import numpy as np
import pytest

from ies_dispatch import devices
from ies_dispatch.milp import LinExpr, MilpOptions, MilpProblem, SolveStatus, solve_lp, solve_milp
from ies_dispatch.model import (
    Carrier, ConverterParams, FlueGasParams, HeatPumpParams, Mode, StorageParams, WastePlantParams,
)


def plant(**kw):
    base = dict(daily_energy=2000.0, p_min=60.0, p_max=100.0, ramp=15.0, flue_heat_per_mwh=0.15,
                co2_per_mwh=0.075, carbon_coeff=35.0, emis_intensity=0.528, emis_baseline=0.472)
    base.update(kw)
    return WastePlantParams(**base)


def fix(problem, indices, values):
    for i, v in zip(indices, values):
        problem.variables[i].lower = problem.variables[i].upper = float(v)


def storage(**kw):
    base = dict(carrier=Carrier.ELECTRIC, p_charge_max=10.0, p_discharge_max=10.0, eta_charge=0.95,
                eta_discharge=0.95, soc_min=0.0, soc_max=50.0, soc_initial=0.0)
    base.update(kw)
    return StorageParams(**base)


# -- waste plant --------------------------------------------------------------------

def test_plant_daily_energy_holds():
    p = MilpProblem()
    blk = devices.build_waste_plant(plant(), p, 24)
    rng = np.random.default_rng(0)
    p.add_objective(LinExpr(dict(zip(blk.var_handles["wi_power"], rng.normal(size=24)))))
    rep = solve_lp(p)
    assert rep.ok
    assert sum(rep.x[i] for i in blk.var_handles["wi_power"]) == pytest.approx(2000.0, abs=1e-7)


def test_plant_degenerate_bounds():
    p = MilpProblem()
    blk = devices.build_waste_plant(plant(p_min=80.0, p_max=80.0, daily_energy=1920.0), p, 24)
    rep = solve_lp(p)
    assert np.allclose(rep.x[blk.var_handles["wi_power"]], 80.0)


def test_plant_rejects_infeasible_daily_energy():
    with pytest.raises(ValueError, match="daily energy"):
        devices.build_waste_plant(plant(daily_energy=3000.0), MilpProblem(), 24)


def test_plant_ramp_cut_against_grid_enumeration():
    params = plant(daily_energy=300.0, p_min=50.0, p_max=150.0, ramp=20.0)
    grid = range(50, 151, 10)

    def feasible_by_model(sched):
        p = MilpProblem()
        blk = devices.build_waste_plant(params, p, 3)
        fix(p, blk.var_handles["wi_power"], sched)
        return solve_lp(p).status is SolveStatus.OPTIMAL

    assert feasible_by_model((80, 100, 120))
    assert not feasible_by_model((60, 100, 140))
    for sched in itertools.product(grid, repeat=3):
        if sum(sched) != 300:
            continue
        by_hand = all(abs(b - a) <= 20 for a, b in zip(sched, sched[1:]))
        assert feasible_by_model(sched) == by_hand


def test_plant_census():
    p = MilpProblem()
    blk = devices.build_waste_plant(plant(), p, 24)
    assert blk.num_vars == 24
    assert len(blk.rows("ramp")) == 2 * 23
    assert len(blk.rows("daily_energy")) == 1
    assert len(blk.expressions["flue_heat"]) == 24


# -- flue gas chain -----------------------------------------------------------------

def _flue(mode, spray=0.8, share=(1.0, 0.9), sep=0.25, wi=None, heat_per=0.15, co2_per=0.075):
    p = MilpProblem()
    params = plant(flue_heat_per_mwh=heat_per, co2_per_mwh=co2_per)
    wi_blk = devices.build_waste_plant(params, p, 24)
    if wi is not None:
        fix(p, wi_blk.var_handles["wi_power"], [wi] * 24)
        p.constraints[wi_blk.rows("daily_energy")[0]].rhs = 24 * wi
    flue = FlueGasParams(sep, share[0], share[1], spray)
    blk = devices.build_flue_chain(flue, HeatPumpParams(4.0, 10.0), wi_blk, mode, p)
    return p, blk


def test_heat_pump_source_cap():
    # flue heat 10 MW per hour, spray 0.8, cop 4 -> at most 8 MW heat from 2 MW electricity
    p, blk = _flue(Mode.M3, wi=100.0, heat_per=0.1)
    heat = blk.signal("hp_heat")
    p.add_objective(LinExpr.sum(heat) * -1.0)
    rep = solve_lp(p)
    assert rep.ok
    assert all(h.value(rep.x) == pytest.approx(8.0) for h in heat)
    assert all(rep.x[i] == pytest.approx(2.0) for i in blk.var_handles["hp_elec"])


def test_flue_chain_gated_by_mode():
    for mode in (Mode.M1, Mode.M2):
        _, blk = _flue(mode)
        assert blk.num_vars == 0 and blk.num_constraints == 0
    _, b3 = _flue(Mode.M3)
    assert set(b3.roles()) == {"hp_elec", "hp_heat"}
    _, b4 = _flue(Mode.M4)
    assert set(b4.roles()) == {"hp_elec", "hp_heat", "co2_capture", "sep_elec"}
    assert b4.num_vars == 48


def test_full_capture_parasitic_load():
    # raw CO2 5 t/h with fraction*rate = 1 and 0.25 MWh/t -> 1.25 MWh per hour at full capture
    p, blk = _flue(Mode.M4, share=(1.0, 1.0), wi=80.0, co2_per=5.0 / 80.0)
    cap = blk.var_handles["co2_capture"]
    p.add_objective(LinExpr.sum(LinExpr.var(i, -1.0) for i in cap))
    rep = solve_lp(p)
    assert rep.x[cap[0]] == pytest.approx(5.0)
    assert blk.signal("sep_elec")[0].value(rep.x) == pytest.approx(1.25)


def test_capture_is_a_free_choice():
    p, blk = _flue(Mode.M4, wi=80.0)
    p.add_objective(LinExpr.sum(LinExpr.var(i) for i in blk.var_handles["co2_capture"]))
    rep = solve_lp(p)
    assert np.allclose(rep.x[blk.var_handles["co2_capture"]], 0.0)


# -- converters ---------------------------------------------------------------------

def _converter(name, params, value, **kw):
    p = MilpProblem()
    blk = devices.build_converter(name, params, p, 2, **kw)
    fix(p, blk.var_handles[f"{name.lower()}_input"], [value, value])
    rep = solve_lp(p)
    assert rep.ok
    return {k: blk.signal(k)[0].value(rep.x) for k in blk.expressions}


def test_electrolyzer():
    assert _converter("EL", ConverterParams(0.87, in_max=100.0, ramp_up=20, ramp_down=20), 100.0) == \
        {"el_h2_out": pytest.approx(87.0)}


def test_methanation():
    out = _converter("MR", ConverterParams(0.60, in_max=50.0), 50.0, eta_el=0.87)
    assert out["mr_gas_out"] == pytest.approx(30.0)
    assert out["mr_heat_out"] == pytest.approx(0.1188 * 50.0 / 0.87)


def test_fuel_cell_zero_input():
    out = _converter("HFC", ConverterParams(0.5, 0.45, in_max=50.0, ratio_min=0.9, ratio_max=0.9), 0.0)
    assert out == {"hfc_elec_out": 0.0, "hfc_heat_out": 0.0}


def test_chp_outputs_and_ratio():
    params = ConverterParams(0.35, 0.45, 0.0, 330.0, ratio_min=1.0, ratio_max=1.6)
    out = _converter("CHP", params, 100.0)
    assert out["chp_elec_out"] == pytest.approx(35.0)
    assert out["chp_heat_out"] == pytest.approx(45.0)
    assert 1.0 <= out["chp_heat_out"] / out["chp_elec_out"] <= 1.6


def test_chp_ratio_outside_bounds_forces_off():
    params = ConverterParams(0.35, 0.45, 0.0, 330.0, ratio_min=1.5, ratio_max=1.6)
    p = MilpProblem()
    blk = devices.build_converter("CHP", params, p, 2)
    p.add_objective(LinExpr.sum(LinExpr.var(i, -1.0) for i in blk.var_handles["chp_input"]))
    rep = solve_lp(p)
    assert np.allclose(rep.x[blk.var_handles["chp_input"]], 0.0)


def test_converter_errors():
    with pytest.raises(ValueError, match="unknown converter"):
        devices.build_converter("turbine", ConverterParams(0.5), MilpProblem())
    with pytest.raises(ValueError, match="single-output"):
        devices.build_converter("GB", ConverterParams(0.9, ratio_min=1.0), MilpProblem())
    with pytest.raises(ValueError):
        devices.build_converter("MR", ConverterParams(0.6), MilpProblem())


def test_converter_ramp():
    p = MilpProblem()
    blk = devices.build_converter("GB", ConverterParams(0.95, in_max=60.0, ramp_up=12.0, ramp_down=12.0), p, 4)
    x = blk.var_handles["gb_input"]
    fix(p, x[:1], [0.0])
    p.add_objective(LinExpr.var(x[3], -1.0))
    rep = solve_lp(p)
    assert rep.x[x[3]] == pytest.approx(36.0)
    assert len(blk.rows("ramp")) == 6


# -- storage ------------------------------------------------------------------------

def test_single_step_soc():
    p = MilpProblem()
    blk = devices.build_storage(storage(), p, 2)
    ch = blk.var_handles["electric_storage_charge"]
    fix(p, ch, [10.0, 0.0])
    rep = solve_milp(p)
    soc = blk.var_handles["electric_storage_soc"]
    # cyclic end state forces the second hour to discharge it back
    assert rep.x[soc[0]] == pytest.approx(9.5)
    assert rep.x[soc[1]] == pytest.approx(0.0)
    assert rep.x[blk.var_handles["electric_storage_discharge"][1]] == pytest.approx(9.5 * 0.95)


def test_zero_capacity_storage():
    p = MilpProblem()
    blk = devices.build_storage(storage(soc_min=5.0, soc_max=5.0, soc_initial=5.0), p, 6)
    flows = blk.var_handles["electric_storage_charge"] + blk.var_handles["electric_storage_discharge"]
    p.add_objective(LinExpr.sum(LinExpr.var(i, -1.0) for i in flows))
    rep = solve_milp(p)
    assert np.allclose(rep.x[flows], 0.0, atol=1e-9)


def test_exclusivity_holds_even_when_cycling_pays():
    p = MilpProblem()
    blk = devices.build_storage(storage(soc_initial=20.0, eta_charge=1.0, eta_discharge=1.0), p, 6)
    ch = blk.var_handles["electric_storage_charge"]
    dis = blk.var_handles["electric_storage_discharge"]
    p.add_objective(LinExpr.sum(LinExpr.var(i, -1.0) for i in ch + dis))
    rep = solve_milp(p, MilpOptions(mip_gap=0.0))
    assert rep.ok
    assert all(rep.x[c] * rep.x[d] <= 1e-9 for c, d in zip(ch, dis))
    assert rep.x[blk.var_handles["electric_storage_soc"][-1]] == pytest.approx(20.0)


def test_storage_census():
    p = MilpProblem()
    blk = devices.build_storage(storage(name="bess"), p, 24)
    assert blk.num_vars == 96
    assert len(p.binary_indices) == 24
    assert blk.num_constraints == 24 * 3 + 1
    assert "bess_soc" in blk.var_handles


def test_time_step_scaling_keeps_fixed_schedule_feasible():
    sched = [10.0, 0.0, 0.0, 0.0]
    dis = [0.0, 0.0, 5.0, 4.5]
    for dt in (1.0, 0.5, 2.0):
        p = MilpProblem()
        s = storage(soc_min=0.0, soc_max=50.0 * dt, soc_initial=10.0 * dt, eta_charge=0.95, eta_discharge=1.0)
        blk = devices.build_storage(s, p, 4, dt)
        fix(p, blk.var_handles["electric_storage_charge"], sched)
        fix(p, blk.var_handles["electric_storage_discharge"], dis)
        assert solve_milp(p).status is SolveStatus.OPTIMAL
        w = MilpProblem()
        wb = devices.build_waste_plant(plant(daily_energy=24 * 80.0 * dt), w, 24, dt)
        fix(w, wb.var_handles["wi_power"], [80.0] * 24)
        assert solve_lp(w).status is SolveStatus.OPTIMAL


# -- renewables and purchases -------------------------------------------------------

def test_renewables_and_grid(preset_m4):
    p = MilpProblem()
    blk = devices.build_renewables_and_grid(preset_m4, p)
    wind = blk.var_handles["wind"]
    fix(p, wind[:1], [90.0])
    prof = dataclasses.replace(preset_m4.profiles)
    rep = solve_lp(p)
    curt = blk.signal("wind_curtail")[0].value(rep.x)
    assert curt == pytest.approx(prof.wind_avail.values[0] - 90.0)
    pv0 = blk.var_handles["pv"][0]
    assert p.variables[pv0].upper == 0.0  # no sun at midnight
    assert blk.signal("pv_curtail")[0].value(rep.x) == 0.0
    assert blk.num_vars == 5 * 24
    assert p.variables[blk.var_handles["thermal"][0]].lower == preset_m4.thermal_min


def test_block_rejects_duplicates():
    blk = devices.DeviceBlock("x", 2)
    blk.add_signal("a", [0, 1])
    with pytest.raises(ValueError):
        blk.add_signal("a", [0, 1])
    with pytest.raises(ValueError):
        blk.add_signal("b", [0])
    blk.tag("t", [])
    with pytest.raises(ValueError):
        blk.tag("t", [])
