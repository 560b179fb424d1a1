import numpy as np
import pytest
from hypothesis import settings

from tightperm import VoxelImage
from tightperm.synth import BlockedChannel, Channel, generate

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def mixed_image(rng):
    """Small random fluid/porous/solid image with a guaranteed open column."""
    phi = rng.choice([0, 0, 40, 60, 100], size=(4, 5, 6)).astype(np.uint8)
    phi[1, 2, :] = 0
    return VoxelImage(phi)


@pytest.fixture(scope="session")
def blocked_channel():
    return generate(BlockedChannel(width=16, slab_phi=60, slab_thickness=4, n=64))


@pytest.fixture(scope="session")
def open_channel():
    return generate(Channel(width=8, n=32))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
