import numpy as np
import pytest

from poincare import TruncationPolicy
from qseries import cm_newform_g, delta_series, good_example_series


@pytest.fixture(scope="session")
def g_series():
    return cm_newform_g(220)


@pytest.fixture(scope="session")
def m_series():
    return good_example_series(260)


@pytest.fixture(scope="session")
def delta():
    return delta_series(40)


@pytest.fixture(scope="session")
def reference_policy():
    # c <= 9 * 150 at 128 bits
    return TruncationPolicy(c_max=1350)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
