import numpy as np
import pytest

from sglscreen import GroupPartition, Problem
from sglscreen.data import SyntheticConfig, generate_synthetic


def small_instance(seed=0, n=50, p=200, group_size=5, **kw):
    """Desk-scale synthetic problem: 40 groups of 5 by default."""
    cfg = SyntheticConfig(n=n, p=p, group_size=group_size, seed=seed, **kw)
    return generate_synthetic(cfg)


def random_partition(rng, p, max_size=6):
    """Non-contiguous random partition of ``range(p)``."""
    perm = rng.permutation(p)
    cuts, i = [], 0
    while i < p:
        k = int(rng.integers(1, max_size + 1))
        cuts.append(np.sort(perm[i:i + k]))
        i += k
    return GroupPartition(cuts, p)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny():
    prob, part, beta = small_instance(seed=3, n=30, p=60, group_size=4,
                                      gamma1=3, gamma2=2)
    return prob, part


@pytest.fixture
def toy_problem():
    X = np.array([[1.0, 0.0, 2.0],
                  [0.0, 1.0, -1.0],
                  [1.0, 1.0, 0.5],
                  [0.5, -1.0, 1.0]])
    y = np.array([1.0, -0.5, 2.0, 0.3])
    return Problem(X, y), GroupPartition([[0, 1], [2]], 3)
