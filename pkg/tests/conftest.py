import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ergopt.maps import make_map  # noqa: E402
from ergopt.moduli import make_omega_alpha_beta  # noqa: E402
from ergopt.orbits import generate_schedule  # noqa: E402

# Filled by the acceptance tests; printed at the end of the session.
ACCEPTANCE_LINES: dict = {}


@pytest.fixture(scope="session")
def mp():
    return make_map("mp", s=0.5)


@pytest.fixture(scope="session")
def mp_schedule(mp):
    return generate_schedule(mp, 0.25, 0.96, 110, n1=1500)


@pytest.fixture(scope="session")
def g1():
    return make_map("farey-g", rho=1.0)


@pytest.fixture(scope="session")
def g1_schedule(g1):
    return generate_schedule(g1, 0.5, 0.96, 80, n1=300)


@pytest.fixture(scope="session")
def omega_03():
    return make_omega_alpha_beta(0.3, 0.0)


@pytest.fixture(scope="session")
def omega_08():
    return make_omega_alpha_beta(0.8, 0.0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
