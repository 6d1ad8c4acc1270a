import numpy as np
import pytest

from motionqa.imagecore import random_slice
from motionqa.phantom import make_phantom
from motionqa.rng import make_rng


@pytest.fixture(scope="session")
def phantom_volumes():
    """Small, fast volumes for pipeline/corruption mechanics."""
    return [make_phantom(dims=(96, 96, 64), seed=i) for i in range(3)]


@pytest.fixture(scope="session")
def acquisition_sized_volumes():
    """Acquisition-sized volumes whose slices nearly fill the 256 frame,
    including one thick-slice anisotropic volume."""
    return [
        make_phantom(dims=(240, 240, 150), seed=0),
        make_phantom(dims=(230, 230, 134), seed=1),
        make_phantom(dims=(256, 256, 40), spacing=(0.9, 0.9, 4.4), seed=2),
    ]


@pytest.fixture(scope="session")
def phantom_slices(phantom_volumes):
    """20 normalized slices drawn across the small phantom set."""
    rng = make_rng(999)
    return [random_slice(phantom_volumes[i % 3], rng)[0] for i in range(20)]


@pytest.fixture()
def rng():
    return np.random.default_rng(20240613)
