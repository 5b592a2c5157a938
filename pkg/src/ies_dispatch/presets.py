"""Bundled scenario: a synthetic winter day shaped like a typical northern load.

The profiles are made-up 24-point curves (evening wind peak, midday PV,
morning and evening electric peaks, flat-high heat load); they are not
measured data. The file is written for mode M4; other modes reuse it.
"""

from __future__ import annotations

import dataclasses
from importlib import resources
from pathlib import Path
from typing import Dict, Union

from .model import Mode, ScenarioConfig
from .scenario_io import load_scenario

PRESET_NAME = "synthetic_day"


def preset_path() -> Path:
    return Path(str(resources.files("ies_dispatch") / "data" / f"{PRESET_NAME}.json"))


def load_preset(mode: Union[Mode, str] = Mode.M4) -> ScenarioConfig:
    config = load_scenario(preset_path())
    mode = Mode.parse(mode)
    return dataclasses.replace(config, mode=mode, name=f"{PRESET_NAME}_{mode.value.lower()}")


def all_presets() -> Dict[Mode, ScenarioConfig]:
    return {m: load_preset(m) for m in Mode}
