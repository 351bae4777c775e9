import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from switch_model import build_scenario  # noqa: E402

CONFIG_DIR = ROOT / "configs"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long simulations (deselect with -m 'not slow')")


@pytest.fixture
def scenario_a():
    return build_scenario("A", 0.632, 1.0).topology


@pytest.fixture
def scenario_b():
    return build_scenario("B", 0.632, 1.0).topology


@pytest.fixture
def scenario_c():
    return build_scenario("C", 0.632, 1.0).topology


@pytest.fixture(autouse=True)
def _isolated_settings(monkeypatch):
    from settings import get_settings
    for name in ("CVSWITCH_STEPS", "CVSWITCH_SEED", "CVSWITCH_DLAM", "CVSWITCH_WORKERS", "CVSWITCH_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()
