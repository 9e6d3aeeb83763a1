"""
Shared pytest fixtures for isoplate tests.

Provides small plate models on coarse meshes and environment isolation for
the settings and logging layers.
"""

import numpy as np
import pytest

from isoplate.services import thickness_field as tf
from isoplate.services.laminate import LaminaMaterial
from isoplate.services.plate_fem import LoadCase
from tests.helpers import make_plate


# =============================================================================
# Environment Fixtures
# =============================================================================

@pytest.fixture(autouse=True)
def reset_environment(monkeypatch):
    """Keep ISOPLATE_* variables from the shell out of the tests."""
    for key in [
        'ISOPLATE_OUTPUT_DIR', 'ISOPLATE_LOG_LEVEL', 'ISOPLATE_LOG_JSON',
        'ISOPLATE_CSV_SIGNIFICANT_DIGITS', 'ISOPLATE_DENSE_DOF_WARNING',
        'ISOPLATE_MAX_WORKERS',
    ]:
        monkeypatch.delenv(key, raising=False)
    yield


# =============================================================================
# Model Fixtures
# =============================================================================

@pytest.fixture
def isotropic_plate():
    """Coarse simply supported isotropic plate under uniaxial x compression."""
    return make_plate(load=LoadCase.uniaxial_x(), boundary=[("ss1", ("AD", "BC", "AB", "CD"))])


@pytest.fixture
def crossply_plate():
    """Coarse simply supported 0/90/90/0 tapered plate under biaxial compression."""
    return make_plate(
        angles=(0.0, 90.0, 90.0, 0.0),
        material=LaminaMaterial.from_ratios(),
        thickness=tf.tapered_x(10.0, 0.2, 0.01),
        load=LoadCase.biaxial(),
        boundary=[("ss1", ("AD", "BC", "AB", "CD"))],
    )


@pytest.fixture
def random_state():
    """Deterministic generator for perturbation vectors."""
    return np.random.default_rng(20240117)
