import numpy as np
import pytest

from satmimo.rate import mi_table


@pytest.fixture(scope="session")
def table():
    """Best-alphabet MI lookup shared across the suite (about 10 s to build)."""
    return mi_table()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


ACCEPTANCE_LINES: list = []


def acceptance_line(criterion: str, passed: bool, detail: str) -> bool:
    """Record and print one pass/fail line for an acceptance criterion."""
    line = f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
