import numpy as np
import pytest

from amreg import value_noise_texture


@pytest.fixture
def texture():
    """Factory for seeded procedural textures: texture(h, w=None, seed=0)."""

    def make(height: int, width: int | None = None, seed: int = 0, **kwargs) -> np.ndarray:
        return value_noise_texture(height, width or height, seed, **kwargs)

    return make


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))
