import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from scheme import GridSpec  # noqa: E402
from systems import system_keyfitz_kranzer, system_korchinski  # noqa: E402


@pytest.fixture
def kk():
    return system_keyfitz_kranzer()


@pytest.fixture
def korchinski():
    return system_korchinski()


@pytest.fixture
def small_grid():
    return GridSpec.from_n_cells(-1.0, 1.0, 40)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
