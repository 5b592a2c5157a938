import dataclasses

import numpy as np
import pytest

from ies_dispatch.carbon import LadderSpec, ladder_cost
from ies_dispatch.milp import MilpOptions, SolveStatus
from ies_dispatch.model import Mode, TimeSeries, Unit
from ies_dispatch.scheduler import (
    COST_FIELDS, PRIMARY_SIGNALS, ScenarioInvalid, assemble, balance_residuals, build, evaluate_costs,
    optimize,
)


def zero_series(T=24):
    return TimeSeries((0.0,) * T)


def test_m1_has_no_refined_devices(preset_m4):
    p = assemble(dataclasses.replace(preset_m4, mode=Mode.M1))
    names = {v.name.rsplit("_t", 1)[0] for v in p.variables}
    for prefix in ("hfc_input", "hp_elec", "co2_capture", "co2_route", "hydrogen_storage_charge"):
        assert prefix not in names
    assert "el_input" in names and "mr_input" in names


def test_m4_census(preset_m4):
    # blocks: wi 24, supply 5x24, five converters 5x24, flue 3x24, four storages 4x96 = 720 vars;
    # ladder over the bracket (-258.6, 1440.9) has 5 pieces: delta, cost and 5 fills
    p = assemble(preset_m4)
    assert p.num_vars == 727
    assert p.num_constraints == 812
    assert len(p.binary_indices) == 96


def test_census_per_mode(preset_m4):
    counts = {m: assemble(dataclasses.replace(preset_m4, mode=m)) for m in Mode}
    assert [(p.num_vars, p.num_constraints, len(p.binary_indices)) for p in counts.values()] == [
        (535, 597, 72), (655, 716, 96), (679, 740, 96), (727, 812, 96),
    ]


def test_delta_bracket_covers_solutions(solved_modes, preset_m4):
    lo, hi = build(preset_m4).delta_bounds
    for sol in solved_modes.values():
        assert lo <= sol.ledger.delta <= hi


def test_zero_scenario_costs_nothing(preset_m4):
    prof = preset_m4.profiles
    zeros = dataclasses.replace(prof, elec_load=zero_series(), heat_load=zero_series(), gas_load=zero_series(),
                                wind_avail=zero_series(), pv_avail=zero_series())
    cfg = dataclasses.replace(
        preset_m4,
        profiles=zeros,
        plant=dataclasses.replace(preset_m4.plant, p_min=0.0, p_max=0.0, daily_energy=0.0),
        chp=dataclasses.replace(preset_m4.chp, in_min=0.0),
        thermal_min=0.0,
    )
    sol = optimize(cfg, MilpOptions(mip_gap=1e-6))
    assert sol.status is SolveStatus.OPTIMAL
    assert sol.objective == pytest.approx(0.0, abs=1e-6)
    for name, ts in sol.schedules.items():
        if name.endswith(("_soc", "_mode")):
            continue
        assert np.allclose(ts.array, 0.0, atol=1e-7), name


def test_evaluate_costs_examples(preset_m4):
    T = 24
    sched = {n: np.zeros(T) for n in PRIMARY_SIGNALS}
    sched["wi_power"] = np.full(T, 2000.0 / T)
    sched["wind"] = np.array(preset_m4.profiles.wind_avail.values)
    sched["wind"][0] -= 30.0
    sched["pv"] = np.array(preset_m4.profiles.pv_avail.values)
    costs = evaluate_costs(preset_m4, sched)
    assert costs.wi_penalty == pytest.approx(112.0 * 35.0)
    assert costs.curtailment == pytest.approx(30.0 * 28.0)
    assert costs.total == pytest.approx(sum(costs.parts().values()))


def test_evaluate_costs_empty_schedule_zero_loads(preset_m4):
    prof = dataclasses.replace(preset_m4.profiles, wind_avail=zero_series(), pv_avail=zero_series())
    cfg = dataclasses.replace(preset_m4, profiles=prof)
    costs = evaluate_costs(cfg, {n: np.zeros(24) for n in PRIMARY_SIGNALS})
    assert all(v == 0.0 for v in costs.parts().values())


def test_evaluate_costs_missing_signal(preset_m4):
    with pytest.raises(ValueError, match="missing schedule signals: grid"):
        evaluate_costs(preset_m4, {n: np.zeros(24) for n in PRIMARY_SIGNALS if n != "grid"})


def test_doubling_prices_doubles_cost(solved_modes, preset_m4):
    sol = solved_modes[Mode.M4]
    tf, pl, cm = preset_m4.tariffs, preset_m4.plant, preset_m4.carbon
    doubled = dataclasses.replace(
        preset_m4,
        tariffs=dataclasses.replace(
            tf, elec_price=tf.elec_price.scaled(2.0), gas_price=2 * tf.gas_price, co2_price=2 * tf.co2_price,
            p2g_opex=2 * tf.p2g_opex, curtail_wind=2 * tf.curtail_wind, curtail_pv=2 * tf.curtail_pv,
            om_wind=2 * tf.om_wind, om_pv=2 * tf.om_pv, thermal_cost=2 * tf.thermal_cost),
        plant=dataclasses.replace(pl, carbon_coeff=2 * pl.carbon_coeff),
        carbon=dataclasses.replace(cm, base_price=2 * cm.base_price),
    )
    base = evaluate_costs(preset_m4, sol.schedules)
    again = evaluate_costs(doubled, sol.schedules)
    assert again.total == pytest.approx(2 * base.total, rel=1e-12)


def test_solution_invariants(solved_modes, preset_m4):
    for mode, sol in solved_modes.items():
        cfg = dataclasses.replace(preset_m4, mode=mode)
        assert sol.status is SolveStatus.OPTIMAL
        for carrier, r in balance_residuals(cfg, sol.schedules).items():
            assert np.abs(r).max() <= 1e-6, (mode, carrier)
        assert abs(sol.objective - sol.costs.total) <= 1e-6 * max(1.0, sol.costs.total)
        spec = LadderSpec.from_market(cfg.carbon)
        want = ladder_cost(spec, sol.ledger.delta)
        assert abs(sol.carbon_cost_var - want) <= 1e-6 * max(1.0, abs(want))
        assert sol.ledger.consistency_error() <= 1e-9
        assert sol.schedules["wi_power"].total() == pytest.approx(2000.0, abs=1e-7)
        for s in cfg.active_storages():
            assert abs(sol.schedules[f"{s.label}_soc"].values[-1] - s.soc_initial) <= 1e-7
            ch = sol.series(f"{s.label}_charge")
            dis = sol.series(f"{s.label}_discharge")
            assert np.all(ch * dis <= 1e-6)


def test_mode_specific_signals(solved_modes):
    assert "hfc_input" not in solved_modes[Mode.M1].schedules
    assert "hp_heat" in solved_modes[Mode.M3].schedules
    m4 = solved_modes[Mode.M4].schedules
    assert np.all(m4["co2_route"].array <= m4["co2_capture"].array + 1e-7)
    assert m4["co2_capture"].unit is Unit.TONNE_PER_H


def test_invalid_config_raises(preset_m4):
    bad = dataclasses.replace(preset_m4, plant=dataclasses.replace(preset_m4.plant, daily_energy=3000.0))
    with pytest.raises(ScenarioInvalid) as err:
        optimize(bad)
    assert "daily energy infeasible" in str(err.value)


def islanded(cfg):
    prof = dataclasses.replace(cfg.profiles, wind_avail=zero_series(), pv_avail=zero_series())
    return dataclasses.replace(cfg, profiles=prof, grid_import_max=0.0, thermal_max=40.0)


def test_islanded_builds_then_fails_with_diagnosis(preset_m4):
    cfg = islanded(preset_m4)
    assemble(cfg)  # infeasibility is a solve-time finding
    sol = optimize(cfg, MilpOptions(mip_gap=1e-3))
    assert sol.status is SolveStatus.INFEASIBLE
    assert sol.diagnosis.balance == "electric"
    assert sol.diagnosis.hour is not None
    assert "electric balance cannot close" in sol.diagnosis.message
