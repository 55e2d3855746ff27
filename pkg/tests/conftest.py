import math
from pathlib import Path

import pytest

from skinlab import hyperbolic as hb
from skinlab.convex import GeodesicLine
from skinlab.groups import GroupSpec, critical_exponent, enumerate_orbit
from skinlab.hyperbolic import I, Isometry
from skinlab.measures import patterson_approx

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

# verdict lines of the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []

S3 = math.sqrt(3.0)
A_SCH = Isometry(2, S3, S3, 2)
B_SCH = Isometry(2 + S3, 0, 0, 1 / (2 + S3))


@pytest.fixture(scope="session")
def schottky():
    return GroupSpec("schottky", [A_SCH, B_SCH], "test")


@pytest.fixture(scope="session")
def schottky_table(schottky):
    return enumerate_orbit(schottky, I, 16.0)


@pytest.fixture(scope="session")
def schottky_patterson(schottky_table):
    fit = critical_exponent(schottky_table)
    return patterson_approx(schottky_table, fit.delta, stderr=fit.stderr)


@pytest.fixture(scope="session")
def axis_a():
    """Axis of the first Schottky generator (fixed points -1 and 1)."""
    return GeodesicLine(float(hb.theta_from_real(-1.0)), float(hb.theta_from_real(1.0)))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
