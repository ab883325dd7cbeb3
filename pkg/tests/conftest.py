import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from photonlimits.model import CavityChannel, SystemParams

settings.register_profile(
    "repo", deadline=None, max_examples=30,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("repo")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def lambda_system(kappa_over_g: float, C: float = 1.0) -> SystemParams:
    """kappa = 1, g = 1/ratio, gamma fixed by the cooperativity."""
    return SystemParams.from_cooperativity(1.0, 1.0 / kappa_over_g, C)


def zeeman_system(delta_z: float) -> SystemParams:
    return SystemParams(1.0, 0.6, (
        CavityChannel(math.sqrt(1 / 3), delta_z / 2),
        CavityChannel(-math.sqrt(4 / 15), -delta_z / 2),
    )).centered()


def three_level_system() -> SystemParams:
    return SystemParams(1.0, 0.6, (
        CavityChannel(math.sqrt(1 / 3), 5.0),
        CavityChannel(-math.sqrt(4 / 15), 0.0),
        CavityChannel(math.sqrt(1 / 30), -5.0),
    )).centered()


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)
