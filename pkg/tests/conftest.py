import numpy as np
import pytest

from rydberg_arp.atomdata import CS_CALIBRATION, LevelScheme, uniform_map
from rydberg_arp.pulse import TABLE_II_ENVELOPE, ArpParams, PulseSchedule

FIG2_OMEGA0 = 2.780 * np.sqrt(0.390 * 6.236)

_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance_record(request):
    """Record ``CRITERION n: PASS|FAIL`` for the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(n, ok, detail):
        line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}"
        lines[n] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])


@pytest.fixture
def cs_scheme():
    return LevelScheme(CS_CALIBRATION)


@pytest.fixture
def fig2_params():
    return ArpParams.from_ratios(0.852, 0.944, 2.59, 3.19, 6.270, 5.586, FIG2_OMEGA0, 6.236)


@pytest.fixture
def fig2_schedule(fig2_params):
    return PulseSchedule(fig2_params)


@pytest.fixture
def fig3_schedule(fig2_params):
    return PulseSchedule(fig2_params, TABLE_II_ENVELOPE)


@pytest.fixture
def triangle():
    return uniform_map(3, 608.0)
