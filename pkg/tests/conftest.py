import os

import pytest

from drayage import reference


@pytest.fixture(scope="session", autouse=True)
def _isolated_cache(tmp_path_factory):
    # Per-scenario optimum caching must not leak between runs or pollute HOME.
    path = tmp_path_factory.mktemp("cache")
    old = os.environ.get("DRAYAGE_CACHE_DIR")
    os.environ["DRAYAGE_CACHE_DIR"] = str(path)
    yield
    if old is None:
        os.environ.pop("DRAYAGE_CACHE_DIR", None)
    else:
        os.environ["DRAYAGE_CACHE_DIR"] = old


@pytest.fixture(scope="session")
def capacity_instance():
    return reference.example_instance("capacity")


@pytest.fixture(scope="session")
def policy_instance():
    return reference.example_instance("policy")


@pytest.fixture(scope="session")
def demo_scenario(capacity_instance):
    return reference.example_scenario(capacity_instance)


@pytest.fixture(scope="session")
def baseline_plan():
    return reference.baseline_plan()


@pytest.fixture(scope="session")
def tuned_plan():
    return reference.tuned_plan()


@pytest.fixture(scope="session")
def reservation_rates(capacity_instance):
    return {s.id: s.reservation_rate for s in capacity_instance.sources}
