import numpy as np
import pytest

from warpframe import canonical_example


@pytest.fixture(scope="session")
def slice17():
    return canonical_example("slice", {"n": 2})


@pytest.fixture(scope="session")
def helix65():
    return canonical_example("helix", {})


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
