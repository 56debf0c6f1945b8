import numpy as np
import pytest

from levyforge.levy_model import LevyTriplet
from levyforge.randomness import Uniform


@pytest.fixture
def jd_triplet():
    """Jump diffusion with b = 0, sigma2 = 1, intensity 10 and Uniform(-1, 1) jumps."""
    return LevyTriplet(b=0.0, sigma2=1.0, intensity=10.0, jump_law=Uniform(-1.0, 1.0))


@pytest.fixture
def rng():
    # independent reference generator, distinct from the package's streams
    return np.random.default_rng(20261016)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
