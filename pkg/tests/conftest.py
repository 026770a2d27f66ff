import numpy as np
import pytest

from qnndyn.linalg import RngStream

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_hermitian(gen: np.random.Generator, d: int) -> np.ndarray:
    a = gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))
    return 0.5 * (a + a.conj().T)


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


@pytest.fixture
def stream():
    return RngStream(7)
