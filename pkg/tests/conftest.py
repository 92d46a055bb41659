import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from scenfilter.filter_models import FilterInstance
from scenfilter.market_data import ReturnScenarioMatrix, market_portfolio_return

settings.register_profile("default", max_examples=30, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_instance(seed, n=5, T=12, K=2):
    rng = np.random.default_rng(seed)
    r = ReturnScenarioMatrix(rng.uniform(-0.1, 0.1, (n, T)))
    return FilterInstance(r, K, market_portfolio_return(r))


@pytest.fixture
def small_instance():
    return random_instance(0, n=4, T=8, K=2)
