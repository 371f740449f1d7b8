import numpy as np
import pytest

from heraldlab.holevo import HolevoOpts


@pytest.fixture
def small_opts():
    """A reduced optimizer budget for tests that only need plumbing."""
    return HolevoOpts(restarts=1, ensemble_size=4, max_iters=40)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
