import numpy as np
import pytest

from abreu_bvp import DomainSpec, build_grid


@pytest.fixture(scope="session")
def disk32():
    return build_grid(DomainSpec.disk(1.0), 32)


@pytest.fixture(scope="session")
def disk64():
    return build_grid(DomainSpec.disk(1.0), 64)


@pytest.fixture(scope="session")
def disk128():
    return build_grid(DomainSpec.disk(1.0), 128)


@pytest.fixture(scope="session")
def interval64():
    return build_grid(DomainSpec.interval(0.0, 1.0), 64)


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)
