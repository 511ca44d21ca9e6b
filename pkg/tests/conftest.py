import numpy as np
import pytest

from fringelab.constants import CODATA2018
from fringelab.dispersion import VelocityDistribution
from fringelab.physics import BeamModel, CapacitorGeometry, lithium7


@pytest.fixture(scope="session")
def constants():
    return CODATA2018


@pytest.fixture(scope="session")
def li7():
    return lithium7(24.33e-30)


@pytest.fixture(scope="session")
def reference_geometry():
    # 2a = 50.00 mm, <h> = 2.056 mm, atoms within 50 um of the septum
    return CapacitorGeometry(half_length_a=25.00e-3, mean_gap_h=2.056e-3,
                             septum_offset_x=50e-6, gap_variance=(10e-6) ** 2)


@pytest.fixture(scope="session")
def beam(li7):
    return BeamModel(most_probable_velocity_u=1065.7, speed_ratio=8.0, species=li7)


@pytest.fixture(scope="session")
def dist8():
    return VelocityDistribution(u=1065.7, speed_ratio=8.0)


@pytest.fixture(autouse=True)
def _seed_numpy_legacy():
    # Library code uses explicit generators; this guards any stray legacy use.
    np.random.seed(12345)
