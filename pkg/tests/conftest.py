import numpy as np
import pytest


def random_pd(rng, D, cond=20.0):
    """Random covariance with eigenvalues spread over ``[1, cond]``."""
    Q, _ = np.linalg.qr(rng.standard_normal((D, D)))
    w = np.exp(rng.uniform(0.0, np.log(cond), size=D))
    return (Q * w) @ Q.T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


MARKOV3_OMEGA = np.array([[1.0, -0.9, 0.0], [-0.9, 1.81, -0.9], [0.0, -0.9, 1.81]])


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=str):
        terminalreporter.write_line(RESULTS[key])
