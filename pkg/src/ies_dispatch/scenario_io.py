"""Scenario documents: JSON trees mirroring the dataclass field names.

A time series is written as ``{"values": [...], "unit": "MW", "dt_hours": 1.0}``;
when reading, a bare list is accepted, and so is ``{"csv": "file.csv", "unit": ...}``
pointing at a two-column ``hour,value`` file relative to the scenario file.
"""

from __future__ import annotations

import copy
import csv
import dataclasses
import json
import math
import typing
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

from . import model
from .model import ScenarioConfig, TimeSeries


class ScenarioError(ValueError):
    """Malformed scenario document (unknown/missing fields, wrong types, unreadable files)."""


def _encode(value: Any) -> Any:
    if isinstance(value, TimeSeries):
        return {"values": list(value.values), "unit": value.unit.value, "dt_hours": value.dt_hours}
    if dataclasses.is_dataclass(value):
        return {f.name: _encode(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def config_to_dict(config: ScenarioConfig) -> Dict[str, Any]:
    return _encode(config)


def _read_csv_series(path: Path) -> list:
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ScenarioError(f"cannot read profile file {path}: {exc}") from exc
    if not rows or [h.strip().lower() for h in rows[0][:2]] != ["hour", "value"]:
        raise ScenarioError(f"{path}: expected header 'hour,value'")
    body = [r for r in rows[1:] if r]
    try:
        pairs = sorted((int(float(r[0])), float(r[1])) for r in body)
    except (ValueError, IndexError) as exc:
        raise ScenarioError(f"{path}: malformed row ({exc})") from exc
    hours = [h for h, _ in pairs]
    if not hours:
        raise ScenarioError(f"{path}: no data rows")
    if hours != list(range(hours[0], hours[0] + len(hours))):
        raise ScenarioError(f"{path}: hours must be consecutive")
    return [v for _, v in pairs]


def _float(v: Any, path: str) -> float:
    if isinstance(v, str) and v.strip().lower() in ("inf", "+inf", "infinity", "-inf", "-infinity"):
        return float(v.strip().lower().replace("infinity", "inf"))
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{path}: expected a number, got {v!r}")
    return float(v)


def _decode(tp: Any, raw: Any, path: str, base: Optional[Path]) -> Any:
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is Union:
        inner = [a for a in args if a is not type(None)]
        if raw is None:
            return None
        return _decode(inner[0], raw, path, base)
    if tp is TimeSeries:
        return _decode_series(raw, path, base)
    if dataclasses.is_dataclass(tp):
        return _decode_dataclass(tp, raw, path, base)
    if isinstance(tp, type) and issubclass(tp, Enum):
        try:
            return tp(raw.upper() if tp is model.Mode and isinstance(raw, str) else raw)
        except ValueError:
            choices = ", ".join(m.value for m in tp)
            raise ScenarioError(f"{path}: {raw!r} is not one of {choices}") from None
    if origin is tuple:
        if not isinstance(raw, (list, tuple)):
            raise ScenarioError(f"{path}: expected a list")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_decode(args[0], r, f"{path}[{i}]", base) for i, r in enumerate(raw))
        if len(raw) != len(args):
            raise ScenarioError(f"{path}: expected {len(args)} items")
        return tuple(_decode(a, r, f"{path}[{i}]", base) for i, (a, r) in enumerate(zip(args, raw)))
    if tp is float:
        return _float(raw, path)
    if tp is int:
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise ScenarioError(f"{path}: expected an integer, got {raw!r}")
        return raw
    if tp is str:
        if not isinstance(raw, str):
            raise ScenarioError(f"{path}: expected a string")
        return raw
    raise ScenarioError(f"{path}: unsupported field type {tp!r}")


def _decode_series(raw: Any, path: str, base: Optional[Path]) -> TimeSeries:
    if isinstance(raw, list):
        return TimeSeries(tuple(_float(v, f"{path}[{i}]") for i, v in enumerate(raw)))
    if not isinstance(raw, dict):
        raise ScenarioError(f"{path}: expected a list or an object with values/csv")
    extra = set(raw) - {"values", "csv", "unit", "dt_hours"}
    if extra:
        raise ScenarioError(f"{path}: unknown keys {sorted(extra)}")
    if "csv" in raw:
        csv_path = Path(raw["csv"])
        if not csv_path.is_absolute() and base is not None:
            csv_path = base / csv_path
        values = _read_csv_series(csv_path)
    elif "values" in raw:
        values = [_float(v, f"{path}.values[{i}]") for i, v in enumerate(raw["values"])]
    else:
        raise ScenarioError(f"{path}: needs 'values' or 'csv'")
    try:
        unit = model.Unit(raw.get("unit", "MW"))
    except ValueError:
        raise ScenarioError(f"{path}.unit: unknown unit {raw.get('unit')!r}") from None
    return TimeSeries(tuple(values), unit, _float(raw.get("dt_hours", 1.0), f"{path}.dt_hours"))


def _decode_dataclass(cls: type, raw: Any, path: str, base: Optional[Path]) -> Any:
    if not isinstance(raw, dict):
        raise ScenarioError(f"{path or 'scenario'}: expected an object")
    hints = typing.get_type_hints(cls, vars(model))
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(raw) - set(fields)
    if unknown:
        raise ScenarioError(f"{path or 'scenario'}: unknown fields {sorted(unknown)}")
    kwargs = {}
    for name, f in fields.items():
        sub = f"{path}.{name}" if path else name
        if name not in raw:
            if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
                raise ScenarioError(f"{sub}: missing required field")
            continue
        kwargs[name] = _decode(hints[name], raw[name], sub, base)
    return cls(**kwargs)


def config_from_dict(data: Dict[str, Any], base_dir: Optional[Path] = None) -> ScenarioConfig:
    return _decode_dataclass(ScenarioConfig, data, "", base_dir)


def load_scenario(path: Union[str, Path], overrides: Iterable[str] = ()) -> ScenarioConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
    data = apply_overrides(data, overrides)
    return config_from_dict(data, path.parent)


def dumps(config: ScenarioConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2, ensure_ascii=False) + "\n"


def save_scenario(config: ScenarioConfig, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps(config), encoding="utf-8")


def apply_overrides(data: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """Apply ``a.b.c=value`` (or ``storages.0.soc_max=...``) assignments to a raw tree.

    Values are parsed as JSON when possible, otherwise taken as strings.
    """
    out = copy.deepcopy(data)
    for item in overrides:
        if "=" not in item:
            raise ScenarioError(f"override {item!r} must look like path=value")
        key, text = item.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = out
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node[int(part)] if isinstance(node, list) else node.setdefault(part, {})
        last = parts[-1]
        if isinstance(node, list):
            node[int(last)] = value
        else:
            node[last] = value
    return out
