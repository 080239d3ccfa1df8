import numpy as np
import pytest

from thermadl.model import COLS, ROWS, ThermalFrame
from thermadl.pipeline import calibrate_scenario
from thermadl.simulator import default_scenario, run

T0 = 1617753600  # 2021-04-07T00:00:00Z


def blob(center, sigma, peak=33.0, ambient=22.0, ts=T0):
    """Noise-free Gaussian heat blob frame."""
    yy, xx = np.mgrid[0:ROWS, 0:COLS]
    d2 = (yy - center[0]) ** 2 + (xx - center[1]) ** 2
    return ThermalFrame(ts, ambient + (peak - ambient) * np.exp(-d2 / (2 * sigma**2)))


def uniform(value=22.0, ts=T0):
    return ThermalFrame(ts, np.full(ROWS * COLS, value))


@pytest.fixture(scope="session")
def scenario():
    return default_scenario()


@pytest.fixture(scope="session")
def simulation(scenario):
    return run(scenario.scene, scenario.schedule, scenario.period)


@pytest.fixture(scope="session")
def scenario_rois(scenario):
    return calibrate_scenario(scenario)


_acceptance = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
