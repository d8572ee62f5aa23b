import numpy as np
import pytest

from tensorseal import LayerTensor, ModelContainer
from tensorseal.container import ROLE_EXCLUDED, ROLE_HIDDEN, ROLE_OUTPUT

TEST_SEED = bytes(range(32))

CLASSES = ["plane", "car", "bird", "cat", "deer", "dog", "frog", "horse", "ship", "truck"]

BASE_METADATA = {
    "model_name": "synthetic-cnn",
    "model_version": "1.0",
    "owner": "alice",
    "created": "2026-08-19T00:00:00Z",
}


def make_model(rng: np.random.Generator, n_hidden: int = 2,
               sizes=(32768, 18432), sigma: float = 0.05,
               with_output: bool = True) -> ModelContainer:
    """Synthetic container: n_hidden Gaussian carrier layers plus trimmings."""
    layers = []
    for i in range(n_hidden):
        size = sizes[i % len(sizes)]
        dtype = "float64" if i % 2 == 0 else "float32"
        data = rng.normal(0.0, sigma, size)
        if i % 4 == 3:
            shape = (3, 3, max(1, size // (9 * 64)), 64)
            size = shape[0] * shape[1] * shape[2] * shape[3]
            data = data[:size]
        else:
            shape = (size // 512, 512) if size % 512 == 0 else (size,)
        layers.append(LayerTensor(f"conv{i}", shape, dtype, data.astype(dtype),
                                  ROLE_HIDDEN))
    if with_output:
        layers.append(LayerTensor("head", (10, 256), "float64",
                                  rng.normal(0.0, sigma, 2560), ROLE_OUTPUT))
        layers.append(LayerTensor("head_bias", (10,), "float64",
                                  rng.normal(0.0, sigma, 10), ROLE_EXCLUDED))
    return ModelContainer(layers=layers, class_map=list(CLASSES),
                          metadata=dict(BASE_METADATA))


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)


@pytest.fixture
def model(rng):
    return make_model(rng)


@pytest.fixture
def seed():
    return TEST_SEED
