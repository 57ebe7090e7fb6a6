import pytest
from hypothesis import settings

from leorelay.geometry import ConstellationGeometry
from leorelay.montecarlo import ScenarioConfig, run_campaign

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

REFERENCE_SEED = 20240611


@pytest.fixture(scope="session")
def geom():
    return ConstellationGeometry()


@pytest.fixture(scope="session")
def scenario():
    return ScenarioConfig(seed=REFERENCE_SEED, n_trials=100_000)


@pytest.fixture(scope="session")
def campaign(scenario):
    """One reference-default campaign of 10^5 trials shared across modules."""
    return run_campaign(scenario)


@pytest.fixture(scope="session")
def big_campaign(scenario):
    """10^6 trials for histogram-level checks."""
    return run_campaign(scenario.with_(n_trials=1_000_000, seed=REFERENCE_SEED + 1))
