import numpy as np
import pytest

from homoglab.space import MetricMeasureSpace


def random_space(rng, n_min=2, n_max=10, d=1, spread=4.0):
    """Coordinate-based space with random masses; triangle holds by build."""
    n = int(rng.integers(n_min, n_max + 1))
    if d == 1:
        coords = np.sort(rng.uniform(0, spread, n))[:, None]
    else:
        coords = rng.uniform(0, spread, (n, d))
    mass = rng.uniform(0.4, 1.6, n)
    return MetricMeasureSpace(coords=coords, mass=mass)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
