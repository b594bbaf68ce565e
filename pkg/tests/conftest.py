import pytest

from stcav.barriers import BarrierParams
from stcav.config import default_config
from stcav.dynamics import MAIN, CavState


@pytest.fixture
def params():
    return BarrierParams()


def ego(x=100.0, v=20.0, u=0.0, lane=MAIN):
    return CavState(0, lane, x, v, u)


@pytest.fixture
def small_cfg():
    return default_config(arrivals={"max_cavs": 8})


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
