import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from clldt.core import DecayWarning, Potential, SpatialGrid  # noqa: E402
from clldt.evolution import soliton_solution  # noqa: E402
from clldt.scattering import newton_zero  # noqa: E402
from clldt.verify import random_smooth_potential, sech_potential  # noqa: E402

SOLITON_LAM1 = 0.8 + 0.6j
SECH_LAM1 = 0.40382797455270514 + 0.44532991143074047j
BOX = (0.1, 2.0, 0.1, 2.0)


@pytest.fixture(scope="session")
def grid():
    return SpatialGrid()


@pytest.fixture(scope="session")
def sech(grid):
    return sech_potential(grid)


@pytest.fixture(scope="session")
def sech_lam1(sech):
    return newton_zero(sech, SECH_LAM1)[0]


@pytest.fixture(scope="session")
def soliton(grid):
    return soliton_solution(SOLITON_LAM1, 1, 1, 0.0, grid)


@pytest.fixture(scope="session")
def smooth_potentials(grid):
    return [random_smooth_potential(grid, s) for s in range(3)]


@pytest.fixture(autouse=True)
def _quiet_decay():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DecayWarning)
        yield


def sech_amplitude(grid, amp, width=1.0):
    return Potential.from_function(grid, lambda x: amp / np.cosh(x / width))
