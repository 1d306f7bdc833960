import pytest

from hyperkpp.growth import logistic
from hyperkpp.profile import ProfileOptions, build_minimal

ACCEPTANCE_LINES = []


def record(criterion: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def g():
    return logistic(1.0)


@pytest.fixture(scope="session")
def parabolic_front(g):
    return build_minimal(0.5, g)


@pytest.fixture(scope="session")
def hyperbolic_front(g):
    return build_minimal(2.0, g)


@pytest.fixture(scope="session")
def critical_front(g):
    return build_minimal(1.0, g, critical=True)

