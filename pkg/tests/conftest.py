import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def clustered_data():
    """Small mixture dataset shared by index tests: (base, queries)."""
    from flashann.datasets import generate_synthetic

    ds = generate_synthetic(2000 + 24, 32, seed=9, distribution="gaussian-mixture", clusters=20)
    return ds.data[:2000], ds.data[2000:]


@pytest.fixture(scope="session")
def small_index(clustered_data):
    from flashann.ivfpq import build_index

    base, _ = clustered_data
    return build_index(base, nlist=32, m=8, seed=0)
