import os

import pytest
from hypothesis import HealthCheck, settings

from gdsolver.milp import available_backends

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=400)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture(params=available_backends())
def backend(request):
    return request.param


@pytest.fixture
def fixtures_dir():
    return FIXTURES
