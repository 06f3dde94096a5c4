import numpy as np
import pytest


def random_spd(rng, n, log_spread=1.0):
    """Well-conditioned random SPD matrix: random orthogonal eigenbasis with
    eigenvalues exp(U(-log_spread, log_spread))."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.exp(rng.uniform(-log_spread, log_spread, size=n))
    return q @ np.diag(lam) @ q.T


def random_spd_stack(rng, count, n, log_spread=1.0):
    return np.stack([random_spd(rng, n, log_spread) for _ in range(count)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
