import os
from pathlib import Path

import pytest

from streamfarm import _backend
from streamfarm.config import RuntimeConfig

DATA = Path(__file__).parent / "data"


@pytest.fixture(params=[m.BACKEND for m in _backend.backends()])
def core(request):
    """Each importable kernel module: compiled first, then the pure twin."""
    return {m.BACKEND: m for m in _backend.backends()}[request.param]


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def watchdog():
    # generous bound so a wedged test fails instead of hanging the run
    return RuntimeConfig(watchdog=float(os.environ.get("STREAMFARM_TEST_WATCHDOG", 120)))


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
