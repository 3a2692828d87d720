import numpy as np
import pytest

from grainfuse.datamodel import Dataset, SplitSpec, train_test_split
from grainfuse.synth import SynthConfig, generate


@pytest.fixture(scope="session")
def synthetic():
    return generate(SynthConfig(n_days=120, seed=3))


@pytest.fixture(scope="session")
def split(synthetic):
    return train_test_split(synthetic, SplitSpec(0.7, seed=0))


@pytest.fixture
def make_dataset():
    def factory(features, targets, names=None):
        features = np.asarray(features, dtype=np.float64)
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        return Dataset(features, np.asarray(targets, dtype=np.float64), names)

    return factory


@pytest.fixture
def noisy_dataset(make_dataset):
    rng = np.random.default_rng(42)
    features = rng.normal(size=(60, 3))
    targets = 2.0 * features[:, 0] - features[:, 1] + rng.normal(0.0, 0.1, size=60)
    return make_dataset(features, targets)
