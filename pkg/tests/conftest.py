import numpy as np
import pytest


def random_ph_matrices(rng, n, m, r_rank=None):
    """Random (J, R, Q, B) with skew J, PSD R, SPD Q; R PD by default."""
    j = rng.standard_normal((n, n))
    j = 0.5 * (j - j.T)
    k = n if r_rank is None else r_rank
    g = rng.standard_normal((n, k)) / np.sqrt(max(n, 1))
    r = g @ g.T
    if r_rank is None:
        r = r + 0.1 * np.eye(n)
    h = rng.standard_normal((n, n)) / np.sqrt(max(n, 1))
    q = h @ h.T + 0.5 * np.eye(n)
    b = rng.standard_normal((n, m))
    return j, r, q, b


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
