import numpy as np
import pytest


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_pd(rng, m, k=None, floor=0.1):
    shape = (m, m) if k is None else (k, m, m)
    b = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return b @ np.conj(np.swapaxes(b, -1, -2)) / m + floor * np.eye(m)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
