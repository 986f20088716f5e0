import numpy as np
import pytest

from conformal_gamma import ConformalMetric, DistanceSolver, Domain, ScalarField
from conformal_gamma.counterexample import counterexample_metric


@pytest.fixture(scope="session")
def square():
    return Domain.unit_square()


@pytest.fixture(scope="session")
def flat64(square):
    return DistanceSolver(square, ConformalMetric.constant(1.0), 1 / 64)


@pytest.fixture(scope="session")
def flat2_128(square):
    return DistanceSolver(square, ConformalMetric.constant(2.0), 1 / 128)


@pytest.fixture(scope="session")
def phi4_128(square):
    return DistanceSolver(square, counterexample_metric(4), 1 / 128)


def wave_metric():
    return ConformalMetric(
        ScalarField(lambda p: 1.5 + 0.5 * np.sin(6 * p[:, 0]) * np.cos(5 * p[:, 1]), tag="wave"), 1.0, 2.0)


@pytest.fixture(scope="session")
def wave128(square):
    return DistanceSolver(square, wave_metric(), 1 / 128)


ACCEPTANCE_LINES = []


def record(number: int, title: str, ok: bool, detail: str):
    ACCEPTANCE_LINES.append(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
