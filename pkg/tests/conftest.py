import numpy as np
import pytest

from channelchart import Dataset


def make_dataset(rng: np.random.Generator, n=20, b=3, w=5, d=2, name="random") -> Dataset:
    """Random valid dataset for property tests."""
    csi = (rng.normal(size=(n, b, w)) + 1j * rng.normal(size=(n, b, w))).astype(np.complex64)
    positions = rng.uniform(-5, 5, size=(n, d))
    timestamps = np.sort(rng.uniform(0, 100, size=n))
    return Dataset(name=name, csi=csi, positions=positions, timestamps=timestamps)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
