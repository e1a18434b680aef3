"""
Shared fixtures: a tiny 8x8 grid and architecture so network tests stay fast.
"""
import numpy as np
import pytest

from deepradar.models.architecture import ArchitectureConfig
from deepradar.models.oracle import OracleConfig
from deepradar.models.scene import PolarGridSpec
from deepradar.services.oracle import generate_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid():
    return PolarGridSpec()


@pytest.fixture
def tiny_grid():
    return PolarGridSpec(n_range=8, n_azimuth=8)


@pytest.fixture
def tiny_arch():
    return ArchitectureConfig(
        n_range=8,
        n_azimuth=8,
        raster_channels=[2, 3],
        object_channels=[3, 2],
        encoder_hidden=8,
        d_x=6,
        d_z=3,
        decoder_hidden=8,
        decoder_channels=[3, 2],
        recognition_hidden=8,
        discriminator_channels=[2, 2],
        gmm_components=2,
    )


@pytest.fixture
def tiny_oracle(tiny_grid):
    return OracleConfig(grid=tiny_grid)


@pytest.fixture
def tiny_dataset(tiny_oracle):
    return generate_dataset(12, tiny_oracle, seed=5, workers=1)


@pytest.fixture
def dataset(grid):
    return generate_dataset(10, OracleConfig(grid=grid), seed=7, workers=1)
