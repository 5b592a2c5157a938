"""Mode runs and CSV/manifest output.

Numbers are written with 12 significant digits so every file re-parses to
the values held in the solution. Each mode gets its own directory; the
manifest is written last and lists every file with its SHA-256.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .carbon import LadderSpec, ladder_cost
from .milp import MilpOptions, SolveStatus
from .model import Mode, ScenarioConfig
from .scheduler import COST_FIELDS, DispatchSolution, optimize

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_LIMIT = 0, 1, 2, 3

ELEC_SUPPLY = ("grid", "wind", "pv", "wi_power", "chp_elec_out", "hfc_elec_out", "thermal")
ELEC_USE = ("el_input", "hp_elec", "sep_elec")
HEAT_SUPPLY = ("chp_heat_out", "gb_heat_out", "hfc_heat_out", "mr_heat_out", "hp_heat")


def fmt(v: float) -> str:
    return format(float(v), ".12g")


def run_modes(config: ScenarioConfig, modes: Sequence[Mode], options: Optional[MilpOptions] = None,
              backend: Optional[str] = None, jobs: int = 4) -> Dict[Mode, DispatchSolution]:
    """Solve several modes of one scenario, in parallel.

    Each mode only adds devices to the previous one, so a mode's binary
    assignment is still feasible one step later with the new devices idle. When
    the MIP gap lets a later mode come out above the earlier one, it is
    re-solved starting from the earlier mode's binaries.
    """
    opts = options or MilpOptions()
    modes = sorted(set(modes), key=lambda m: m.value)
    configs = {m: dataclasses.replace(config, mode=m) for m in modes}
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        futures = {m: pool.submit(optimize, configs[m], opts, backend) for m in modes}
        out = {m: f.result() for m, f in futures.items()}
    for prev, cur in zip(modes, modes[1:]):
        a, b = out[prev], out[cur]
        if a.schedules and b.schedules and b.objective > a.objective:
            logger.info("re-solving %s from the %s binaries (%.6g > %.6g)",
                        cur.value, prev.value, b.objective, a.objective)
            start = {n: a.report.primal[n] for n in _binary_names(a)}
            again = optimize(configs[cur], dataclasses.replace(opts, start=start), backend)
            if again.schedules and again.objective < b.objective:
                out[cur] = again
    return out


def _binary_names(sol: DispatchSolution) -> List[str]:
    return [n for n in sol.report.primal if "_mode_t" in n or n.startswith("carbon_step")]


def exit_code(solutions: Iterable[DispatchSolution]) -> int:
    statuses = [s.status for s in solutions]
    if SolveStatus.INFEASIBLE in statuses or SolveStatus.UNBOUNDED in statuses:
        return EXIT_INFEASIBLE
    if SolveStatus.LIMIT in statuses:
        return EXIT_LIMIT
    return EXIT_OK


# -- CSV writers ------------------------------------------------------------------

def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, int, np.floating)) and not isinstance(v, bool) else v
                        for v in row])
    return path


def _hourly(path: Path, sol: DispatchSolution, names: Sequence[str], T: int) -> Path:
    cols = [n for n in names if n in sol.schedules]
    return _write_rows(path, ["hour"] + cols,
                       ([t] + [sol.schedules[n].values[t] for n in cols] for t in range(T)))


def write_solution(sol: DispatchSolution, config: ScenarioConfig, directory: Path) -> List[Path]:
    """Schedule, cost, ledger and plot-data CSVs for one mode."""
    files: List[Path] = []
    T = config.horizon
    if not sol.schedules:
        return files
    files.append(_hourly(directory / "schedule.csv", sol, sorted(sol.schedules), T))
    files.append(_write_rows(directory / "costs.csv", ["term", "value"],
                             [(k, v) for k, v in sol.costs.parts().items()] + [("total", sol.costs.total)]))
    led = sol.ledger
    rows = [(f"quota_{k}", v) for k, v in led.quota_parts.items()]
    rows += [("quota_total", led.quota_total)]
    rows += [(f"actual_{k}", v) for k, v in led.actual_parts.items()]
    rows += [(f"captured_{k}", v) for k, v in led.captured.items()]
    rows += [("delta", led.delta), ("ladder_cost", ladder_cost(LadderSpec.from_market(config.carbon), led.delta))]
    files.append(_write_rows(directory / "ledger.csv", ["item", "value"], rows))

    storages = config.active_storages()
    elec_sto = [s.label for s in storages if s.carrier.value == "electric"]
    heat_sto = [s.label for s in storages if s.carrier.value == "heat"]
    files.append(_hourly(directory / "plot_electric.csv", sol,
                         list(ELEC_SUPPLY) + [f"{s}_discharge" for s in elec_sto]
                         + list(ELEC_USE) + [f"{s}_charge" for s in elec_sto], T))
    files.append(_hourly(directory / "plot_heat.csv", sol,
                         list(HEAT_SUPPLY) + [f"{s}_discharge" for s in heat_sto]
                         + [f"{s}_charge" for s in heat_sto], T))
    if "co2_capture" in sol.schedules:
        files.append(_hourly(directory / "plot_capture.csv", sol, ["raw_co2", "co2_capture", "co2_route"], T))
    return files


def write_cost_matrix(path: Path, solutions: Dict[Mode, DispatchSolution]) -> Path:
    modes = sorted(solutions, key=lambda m: m.value)
    rows = []
    for name in COST_FIELDS + ("total",):
        rows.append([name] + [getattr(solutions[m].costs, name) if solutions[m].costs else "" for m in modes])
    return _write_rows(path, ["term"] + [m.value for m in modes], rows)


def write_curtailment(path: Path, solutions: Dict[Mode, DispatchSolution], T: int) -> Path:
    modes = [m for m in sorted(solutions, key=lambda m: m.value) if solutions[m].schedules]

    def curt(m, t):
        s = solutions[m].schedules
        return s["wind_curtail"].values[t] + s["pv_curtail"].values[t]

    return _write_rows(path, ["hour"] + [m.value for m in modes],
                       ([t] + [curt(m, t) for m in modes] for t in range(T)))


def format_cost_table(solutions: Dict[Mode, DispatchSolution]) -> str:
    modes = sorted(solutions, key=lambda m: m.value)
    width = max(len(n) for n in COST_FIELDS)
    lines = [f"{'term':<{width}}" + "".join(f"{m.value:>16}" for m in modes)]
    for name in COST_FIELDS + ("total",):
        cells = []
        for m in modes:
            c = solutions[m].costs
            cells.append(f"{getattr(c, name):>16.2f}" if c else f"{solutions[m].status.value:>16}")
        lines.append(f"{name:<{width}}" + "".join(cells))
    return "\n".join(lines)


# -- manifest -----------------------------------------------------------------------

def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_manifest(directory: Path, scenario_path: str, scenario_bytes: bytes,
                   solutions: Dict[Mode, DispatchSolution], options: MilpOptions, backend: str,
                   files: Sequence[Path], started: datetime) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "scenario": scenario_path,
        "scenario_sha256": sha256_bytes(scenario_bytes),
        "modes": [m.value for m in sorted(solutions, key=lambda m: m.value)],
        "options": {"mip_gap": options.mip_gap, "node_limit": options.node_limit,
                    "time_limit": options.time_limit, "backend": backend},
        "output_dir": str(directory),
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        "status": {m.value: s.status.value for m, s in sorted(solutions.items(), key=lambda kv: kv[0].value)},
        "objective": {m.value: s.objective for m, s in sorted(solutions.items(), key=lambda kv: kv[0].value)},
        "files": [
            {"path": str(p.relative_to(directory)), "sha256": sha256_bytes(p.read_bytes())}
            for p in files
        ],
    }
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path
