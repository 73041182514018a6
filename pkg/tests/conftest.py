import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from spectriples.lattice import TorusSpec, rotation
from spectriples.pairs import isospectral_pair

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def circle():
    return TorusSpec.from_basis([[1]])


@pytest.fixture(scope="session")
def square():
    return TorusSpec.from_basis([[1, 0], [0, 1]])


@pytest.fixture(scope="session")
def rectangle():
    return TorusSpec.from_basis([[1, 0], [0, 2]])


@pytest.fixture(scope="session")
def skewed():
    return TorusSpec.from_basis(np.array([[1.0, 0.35], [0.0, 1.15]]))


@pytest.fixture(scope="session")
def rotated_square():
    return TorusSpec.from_basis(rotation(0.3))


@pytest.fixture(scope="session")
def pair_4d():
    """The bundled 4D pair, validated by independent shell counting before use."""
    from oracles import theta_counts

    a, b = isospectral_pair()
    ca = theta_counts(a.dual_gram_exact, 100)
    cb = theta_counts(b.dual_gram_exact, 100)
    assert ca == cb, "bundled pair fails the theta oracle"
    return a, b
