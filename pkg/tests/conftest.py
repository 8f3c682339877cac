import numpy as np
import pytest

from ioctomo.opspace import random_state


def interior_state(d, rng, floor=0.02):
    """Random full-rank state with every eigenvalue at least ``floor``."""
    rho = random_state(d, rng)
    return (1 - d * floor) * rho + floor * np.eye(d)


def bloch(rho):
    """Bloch vector of a qubit state."""
    return np.array([2 * rho[0, 1].real, -2 * rho[0, 1].imag, (rho[0, 0] - rho[1, 1]).real])


def to_bloch_matrix(C):
    """Gell-Mann qubit superoperator (traceless block) in Bloch-ball coordinates."""
    return 2 * np.asarray(C)[1:, 1:]


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
