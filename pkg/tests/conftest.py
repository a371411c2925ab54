import pytest

from oscilla.cell import solve_cell
from oscilla.geometry import PeriodicProfile, SourceFunction


@pytest.fixture(scope="session")
def cosine_profile():
    return PeriodicProfile(2.0, (1.0,), 1.0)


@pytest.fixture(scope="session")
def flat_profile():
    return PeriodicProfile.constant(1.0, 1.0)


@pytest.fixture(scope="session")
def cos_source():
    return SourceFunction((0.0, 1.0))


@pytest.fixture(scope="session")
def cosine_cell(cosine_profile):
    return solve_cell(cosine_profile, 16, 6)


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
