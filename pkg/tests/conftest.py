import numpy as np
import pytest

from tiltrecon.geometry import TiltGeometry
from tiltrecon.projector import ProjectionOperator


@pytest.fixture(scope="session")
def desk_op():
    """The desk-scale default: 32x32 image, 32 views over +-60 degrees."""
    return ProjectionOperator(TiltGeometry(num_angles=32), (32, 32))


@pytest.fixture(scope="session")
def small_op():
    """8x8 image, 4 views; small enough for dense-matrix oracles."""
    return ProjectionOperator(TiltGeometry(num_angles=4), (8, 8))


@pytest.fixture
def rng():
    return np.random.default_rng(20240911)
