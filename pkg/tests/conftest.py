import warnings

import numpy as np
import pytest

from realcocycle.harmonics import FrequencyVector, TrigPoly

PHI = (1 + np.sqrt(5)) / 2

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES = {}


@pytest.fixture
def omega2():
    return FrequencyVector(np.array([1.0, PHI]), 0.1, 1.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_poly(rng, d, n, degree, *, zero_mean=False, scale=1.0):
    """Random complex polynomial with modes in the l1 ball of radius ``degree``."""
    from realcocycle.harmonics import lattice_ball
    K = lattice_ball(degree, d)
    C = scale * (rng.standard_normal((len(K), n, n)) + 1j * rng.standard_normal((len(K), n, n)))
    C /= (1 + np.abs(K).sum(axis=1))[:, None, None] ** 2
    P = TrigPoly.from_arrays(K, C, d, n)
    if zero_mean:
        P = P - P.mean()
    return P


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


def pytest_configure(config):
    warnings.filterwarnings("ignore", category=RuntimeWarning, module="realcocycle")
