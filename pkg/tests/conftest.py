import os

import pytest
from hypothesis import HealthCheck, settings

from casimir_neq.dielectric import Constant, Drude, Plasma
from casimir_neq.equilibrium import QuadratureSettings, SystemConfig
from casimir_neq.reflection import VACUUM, LayeredPlate

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

AU_DRUDE = Drude.from_ev(9.0, 0.035)
AU_PLASMA = Plasma.from_ev(9.0)

# acceptance lines collected by tests/test_acceptance.py, echoed after the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def drude():
    return AU_DRUDE


@pytest.fixture
def plasma():
    return AU_PLASMA


@pytest.fixture
def thick_drude_system():
    plate = LayeredPlate(AU_DRUDE, 1e-6, VACUUM)
    return SystemConfig(plate, plate, 2e-6, 300.0, 300.0)


@pytest.fixture
def dissimilar_system():
    """Small, quick nonequilibrium case: thin Drude films on different substrates."""
    p1 = LayeredPlate(Drude.from_ev(9.0, 0.5), 20e-9, Constant(11.66))
    p2 = LayeredPlate(Drude.from_ev(9.0, 0.5), 60e-9, Constant(3.81))
    return SystemConfig(p1, p2, 1e-6, 300.0, 400.0, 300.0)


@pytest.fixture
def loose():
    return QuadratureSettings(rel_tol=1e-6)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
