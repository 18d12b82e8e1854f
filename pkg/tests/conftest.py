import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lowmach.domain import DomainSpec

settings.register_profile("lowmach", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow,
                                                 HealthCheck.function_scoped_fixture])
settings.load_profile("lowmach")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def torus():
    return DomainSpec.torus(32, lx=2 * np.pi)


@pytest.fixture
def channel():
    return DomainSpec.channel(16, 16, lx=1.0)


@pytest.fixture
def cheb_channel():
    return DomainSpec.channel(16, 16, lx=1.0, ncheb=24)
