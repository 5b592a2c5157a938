import pytest

from ies_dispatch.milp import MilpOptions
from ies_dispatch.model import Mode
from ies_dispatch.presets import load_preset
from ies_dispatch.reporting import run_modes


@pytest.fixture(scope="session")
def preset_m4():
    return load_preset(Mode.M4)


@pytest.fixture(scope="session")
def solved_modes(preset_m4):
    """All four modes of the bundled day at gap 1e-3, bundled solver."""
    return run_modes(preset_m4, list(Mode), MilpOptions(mip_gap=1e-3), backend="bundled")
