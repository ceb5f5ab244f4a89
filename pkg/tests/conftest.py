import pytest

from groupsense.features import ALL_GROUPS, build_feature_table
from groupsense.preprocess import clean_session
from groupsense.simulator import ScenarioConfig, simulate_raw, simulate_session

SMALL = ScenarioConfig(n_participants=6, duration_s=300, rng_seed=3)


@pytest.fixture(scope="session")
def small_cfg():
    return SMALL


@pytest.fixture(scope="session")
def small_raw():
    return simulate_raw(SMALL)


@pytest.fixture(scope="session")
def small_session():
    return simulate_session(SMALL)


@pytest.fixture(scope="session")
def small_clean(small_session):
    return clean_session(small_session[0])


@pytest.fixture(scope="session")
def small_table(small_session, small_clean):
    return build_feature_table(small_clean, small_session[0].labels, ALL_GROUPS)
