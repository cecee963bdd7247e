import numpy as np
import pytest

from mondet.tensorio import FeatureTensor


def random_tensor(rng: np.random.Generator, dims) -> FeatureTensor:
    return FeatureTensor(rng.normal(size=dims))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240917)
