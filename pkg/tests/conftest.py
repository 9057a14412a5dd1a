import numpy as np
import pytest

from frameseek import kmeans_train, pq_train


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_bow():
    """16-word vocabulary over 32-d descriptors."""
    gen = np.random.default_rng(100)
    samples = gen.normal(size=(800, 32))
    return kmeans_train(samples, 16, iters=15, seed=100)


@pytest.fixture(scope="session")
def small_pq():
    """4 subquantizers x 8 centers over 32-d residuals."""
    gen = np.random.default_rng(101)
    return pq_train(gen.normal(size=(800, 32)), m=4, n_centers=8, iters=15, seed=101)
