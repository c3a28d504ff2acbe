import pytest

from weakcoupling.potential import PolynomialPotential, zero_potential
from weakcoupling.profiles import InitialData, TestFunction


@pytest.fixture(scope="session")
def pot():
    return PolynomialPotential(3)


@pytest.fixture(scope="session")
def zero():
    return zero_potential()


@pytest.fixture(scope="session")
def f0():
    return InitialData()


@pytest.fixture(scope="session")
def u():
    return TestFunction()


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance line and assert it."""

    def check(number, name, ok, detail=""):
        line = f"criterion {number:2d} {name}: {'PASS' if ok else 'FAIL'} {detail}".rstrip()
        _CRITERIA.append((number, line))
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
