import numpy as np
import pytest

from qndprop.core import OscillatorBathSpec, SpinBathSpec, SystemParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_system():
    return SystemParams(omega=1.0)


@pytest.fixture
def one_mode_bath():
    return OscillatorBathSpec([(1.0, 0.5)])


@pytest.fixture
def two_mode_bath():
    return OscillatorBathSpec([(1.0, 0.4), (2.3, 0.2)])


@pytest.fixture
def spin_bath():
    return SpinBathSpec([(1.0, 0.6), (0.5, 0.3)])


# Acceptance criteria report: tests/test_acceptance.py appends
# (label, passed, detail) tuples here; they are printed after the run.
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
