import pytest

from ehdblowup.core import make_grid, make_parameters


@pytest.fixture(scope="session")
def params():
    return make_parameters(0.05)


@pytest.fixture(scope="session")
def grid():
    return make_grid()


@pytest.fixture(scope="session")
def small_grid():
    return make_grid(nz=128, ntheta=32)


@pytest.fixture(scope="session")
def mid_grid():
    return make_grid(nz=256, ntheta=64)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import summary_lines

    lines = summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
