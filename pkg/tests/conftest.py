import hypothesis
import numpy as np
import pytest

from leiblab import exponents, geometry

hypothesis.settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow])
hypothesis.settings.load_profile("default")


@pytest.fixture(scope="session")
def euclid3():
    return geometry.euclidean(3)


@pytest.fixture(scope="session")
def euclid1():
    return geometry.euclidean(1)


@pytest.fixture(scope="session")
def hyper2():
    return geometry.hyperbolic(2)


@pytest.fixture(scope="session")
def heat3_params():
    return exponents.derive_params(2.0, 1.0, 3)


@pytest.fixture(scope="session")
def pme_params():
    return exponents.derive_params(2.0, 2.0, 3)


@pytest.fixture(scope="session")
def fast_params():
    return exponents.derive_params(2.0, 0.5, 3)
