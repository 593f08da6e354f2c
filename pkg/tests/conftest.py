import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rirsf.dsp import FrameParams
from rirsf.room import ArrayGeometry, RoomSpec, simulate_rir

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def params():
    return FrameParams()


@pytest.fixture(scope="session")
def small_room():
    return RoomSpec((5.0, 4.0, 3.0), 0.3)


@pytest.fixture(scope="session")
def array8():
    return ArrayGeometry.linear([2.0, 1.2, 1.3])


@pytest.fixture(scope="session")
def talker():
    return np.array([3.1, 2.9, 1.6])


@pytest.fixture(scope="session")
def rir_small(small_room, talker, array8):
    return simulate_rir(small_room, talker, array8)


@pytest.fixture(scope="session")
def rir_strong(array8, talker):
    return simulate_rir(RoomSpec((5.0, 4.0, 3.0), 0.6), talker, array8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")
    config._acceptance_lines = []


@pytest.fixture
def record_criterion(request):
    """Log one PASS/FAIL line for an acceptance criterion."""
    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config._acceptance_lines.append((number, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
