import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cranalloc import draw_channels, standard_scenario
from cranalloc.subproblems import Problem

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def small_problem():
    scn = standard_scenario(K=2, M=3, N=4, seed=1)
    return Problem(scn, draw_channels(scn))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
