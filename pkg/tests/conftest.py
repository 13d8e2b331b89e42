import pytest

from maxstop import (Kind, ModelSpec, lookback_reward, make_model,
                     power_sum_reward, put_reward, russian_reward)

# shared parameter set used throughout the worked examples
MU, SIGMA, Q, K, SHAPE_K = 0.05, 0.25, 0.15, 5.0, 0.5


@pytest.fixture(scope="session")
def gbm():
    return make_model(ModelSpec(Kind.GBM, MU, SIGMA, Q))


@pytest.fixture(scope="session")
def power_sum():
    return power_sum_reward(a=0.5, b=1.0, k=SHAPE_K, K=K)


@pytest.fixture(scope="session")
def lookback():
    return lookback_reward(k=SHAPE_K)


@pytest.fixture(scope="session")
def put():
    return put_reward(K=K)


@pytest.fixture(scope="session")
def russian():
    return russian_reward()
