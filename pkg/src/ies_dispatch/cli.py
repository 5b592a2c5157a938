"""Command-line front end.

Exit codes: 0 optimal, 1 input error, 2 infeasible, 3 solver limit.
The scenario argument may be a JSON file or the bundled preset name
``synthetic_day``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from . import presets
from .milp import MilpOptions, export_problem
from .milp.backends import get_backend
from .model import Mode, ScenarioConfig, validate
from .reporting import (
    EXIT_INPUT, EXIT_OK, exit_code, format_cost_table, run_modes, write_cost_matrix,
    write_curtailment, write_manifest, write_solution,
)
from .scenario_io import ScenarioError, apply_overrides, config_from_dict, dumps
from .scheduler import assemble

logger = logging.getLogger("ies_dispatch")


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors are input errors, not "infeasible"
        self.print_usage(sys.stderr)
        raise InputError(message)


def _read(path: str) -> Tuple[bytes, Path]:
    p = Path(path)
    if not p.exists() and path == presets.PRESET_NAME:
        p = presets.preset_path()
    try:
        return p.read_bytes(), p
    except OSError as exc:
        raise InputError(f"cannot read scenario {path}: {exc.strerror or exc}") from exc


def _load(path: str, overrides: Sequence[str]) -> Tuple[ScenarioConfig, bytes]:
    raw, p = _read(path)
    try:
        data = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    try:
        config = config_from_dict(apply_overrides(data, overrides), p.parent)
    except (ScenarioError, TypeError, KeyError, IndexError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    return config, raw


def _modes(text: Optional[str], config: ScenarioConfig) -> List[Mode]:
    if text is None:
        return [config.mode]
    if text.lower() == "all":
        return list(Mode)
    try:
        return [Mode.parse(t) for t in text.split(",")]
    except ValueError:
        raise InputError(f"unknown mode {text!r}; use m1, m2, m3, m4 or all") from None


def _options(args) -> MilpOptions:
    return MilpOptions(mip_gap=args.mip_gap, time_limit=args.time_limit, node_limit=args.node_limit)


def _check(config: ScenarioConfig) -> None:
    problems = validate(config)
    if problems:
        raise InputError("invalid scenario:\n  " + "\n  ".join(problems))


def cmd_validate(args) -> int:
    config, _ = _load(args.scenario, args.set)
    problems = validate(config)
    if problems:
        for p in problems:
            print(p)
        return EXIT_INPUT
    print("ok")
    return EXIT_OK


def _run(args, modes_text: Optional[str], matrix: bool) -> int:
    config, raw = _load(args.scenario, args.set)
    modes = _modes(modes_text, config)
    for m in modes:
        _check(dataclasses.replace(config, mode=m))
    started = datetime.now(timezone.utc)
    options = _options(args)
    try:
        get_backend(args.solver)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    solutions = run_modes(config, modes, options, args.solver, jobs=args.jobs)
    out = Path(args.out)
    files = []
    for m, sol in sorted(solutions.items(), key=lambda kv: kv[0].value):
        files += write_solution(sol, dataclasses.replace(config, mode=m), out / m.value.lower())
        line = f"{m.value}: {sol.status.value}"
        if sol.costs:
            line += f" total={sol.costs.total:.2f} gap={sol.report.gap:.2e} nodes={sol.report.nodes}"
        if sol.diagnosis:
            line += f" ({sol.diagnosis.message})"
        print(line)
    if matrix or len(solutions) > 1:
        files.append(write_cost_matrix(out / "cost_matrix.csv", solutions))
        files.append(write_curtailment(out / "plot_curtailment.csv", solutions, config.horizon))
    if matrix:
        print(format_cost_table(solutions))
    backend = (args.solver or os.environ.get("IES_SOLVER") or "bundled").lower()
    write_manifest(out, str(args.scenario), raw, solutions, options, backend, files, started)
    return exit_code(solutions.values())


def cmd_solve(args) -> int:
    return _run(args, args.mode, matrix=False)


def cmd_compare(args) -> int:
    return _run(args, "all", matrix=True)


def cmd_export_lp(args) -> int:
    config, _ = _load(args.scenario, args.set)
    modes = _modes(args.mode, config)
    if len(modes) != 1:
        raise InputError("export-lp takes a single mode")
    config = dataclasses.replace(config, mode=modes[0])
    _check(config)
    text = export_problem(assemble(config))
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    return EXIT_OK


def cmd_write_preset(args) -> int:
    try:
        config = presets.load_preset(args.mode or Mode.M4)
    except ValueError:
        raise InputError(f"unknown mode {args.mode!r}") from None
    Path(args.path).write_text(dumps(config), encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ies-dispatch", description="Low-carbon day-ahead dispatch of a waste-to-energy IES.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario_args(p):
        p.add_argument("scenario", help="scenario JSON file, or 'synthetic_day' for the bundled preset")
        p.add_argument("--set", action="append", default=[], metavar="PATH=VALUE",
                       help="override a scenario field, e.g. plant.ramp=20 (repeatable)")

    def solver_args(p):
        p.add_argument("--out", default="results", help="output directory (default: results)")
        p.add_argument("--mip-gap", type=float, default=1e-4)
        p.add_argument("--time-limit", type=float, default=600.0)
        p.add_argument("--node-limit", type=int, default=50_000)
        p.add_argument("--solver", default=None, help="bundled or highs (default: $IES_SOLVER or bundled)")
        p.add_argument("--jobs", type=int, default=4, help="modes solved in parallel")

    p = sub.add_parser("validate", help="check a scenario file")
    scenario_args(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="solve one or more modes and write CSV results")
    scenario_args(p)
    solver_args(p)
    p.add_argument("--mode", default=None, help="m1, m2, m3, m4, a comma list, or all (default: file's mode)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="solve all four modes and print the cost matrix")
    scenario_args(p)
    solver_args(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-lp", help="write the MILP in LP text format")
    scenario_args(p)
    p.add_argument("--mode", default=None)
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("write-preset", help="write the bundled synthetic-day scenario to a file")
    p.add_argument("path")
    p.add_argument("--mode", default=None)
    p.set_defaults(func=cmd_write_preset)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
