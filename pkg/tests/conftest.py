import numpy as np
import pytest

from rsma_krr import geometry as geo
from rsma_krr.kernels import WaveContext


@pytest.fixture(scope="session")
def array60():
    return geo.default_array(0.05)


@pytest.fixture(scope="session")
def ctx1k():
    return WaveContext(1000.0)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


# one line per acceptance criterion, printed after the test session
ACCEPTANCE = {}


def record_acceptance(number, passed, detail):
    ACCEPTANCE[number] = (passed, detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
