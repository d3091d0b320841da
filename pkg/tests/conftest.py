import numpy as np
import pytest

from gridcascade.cascade import Policy
from gridcascade.influence import estimate_transitions, train_link_model, train_load_model
from gridcascade.netcase import load_bundled_case
from gridcascade.sampler import PoolConfig, generate_pool


@pytest.fixture(scope="session")
def case():
    return load_bundled_case("ieee30")


@pytest.fixture(scope="session")
def small_pool(case):
    """An EXP1 pool small enough for fast unit tests but with real cascades."""
    config = PoolConfig(
        n_samples=80,
        loading_multipliers=(1.2, 1.5),
        wind_reductions=(0.3,),
        policy=Policy.EXP1,
        seed=11,
    )
    return generate_pool(case, config)


@pytest.fixture(scope="session")
def small_models(small_pool):
    transitions = estimate_transitions(small_pool)
    return (
        train_link_model(small_pool, transitions),
        train_load_model(small_pool, transitions),
    )


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(key=2024))
