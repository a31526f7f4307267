import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


def random_image(rng, h=16, w=16):
    return rng.random((h, w, 3)).astype(np.float32)


@pytest.fixture
def small_image(rng):
    return random_image(rng)
