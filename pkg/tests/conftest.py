import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_unit_ball(rng, dim, count=1, radius=1.0):
    """Random points in the radius-ball of R^dim."""
    v = rng.standard_normal((count, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = radius * rng.uniform(0.0, 1.0, size=count) ** (1.0 / dim)
    out = v * r[:, None]
    return out[0] if count == 1 else out
