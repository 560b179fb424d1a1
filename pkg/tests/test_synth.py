import itertools
import math

import numpy as np
import pytest

from tightperm.classify import Category, classify
from tightperm.synth import (
    BlockedChannel,
    Channel,
    Homogeneous,
    Layered,
    SpecError,
    SphereArray,
    generate,
    table1_suite,
)


def test_deterministic():
    for spec in (SphereArray(0.7, 20), BlockedChannel(6, 60, 3, 20), Layered("y", [(3, 10), (5, 90)], 8)):
        assert generate(spec).porosity.tobytes() == generate(spec).porosity.tobytes()


def test_sphere_volume():
    n = 40
    img = generate(SphereArray(1.0, n))
    frac = img.solid_mask.mean()
    shell = 4 * math.pi * 0.25 / n
    assert abs(frac - math.pi / 6) < shell


def test_sphere_voxel_center_rule():
    img = generate(SphereArray(0.5, 4))
    # centres at +-1/8, +-3/8: only the 8 inner voxels are within 1/4 of the centre
    assert img.solid_mask.sum() == 8


@pytest.mark.parametrize("n", [9, 10])
def test_sphere_cube_symmetries(n):
    arr = generate(SphereArray(0.77, n)).porosity
    for perm in itertools.permutations(range(3)):
        for flips in itertools.product([False, True], repeat=3):
            t = np.transpose(arr, perm)
            for a, f in enumerate(flips):
                if f:
                    t = np.flip(t, a)
            assert np.array_equal(t, arr)


def test_full_width_channel_is_fluid():
    assert generate(Channel(12, 12)).fluid_mask.all()


def test_channel_geometry():
    img = generate(Channel(4, 10, axis="x"))
    assert img.fluid_mask.sum() == 4 * 4 * 10
    assert img.fluid_mask[:, 3:7, 3:7].all()
    assert classify(img, "x").category is Category.B


def test_blocked_channel_categories():
    assert classify(generate(BlockedChannel(6, 60, 2, 16))).category is Category.A
    assert classify(generate(BlockedChannel(6, 100, 2, 16))).category is Category.NON_PERCOLATING
    assert classify(generate(BlockedChannel(6, 0, 2, 16))).category is Category.B


def test_layered_and_homogeneous():
    img = generate(Layered("z", [(2, 10), (3, 90)], 5))
    assert (img.porosity[:, :, :2] == 10).all() and (img.porosity[:, :, 2:] == 90).all()
    img = generate(Layered("x", [(1, 0), (4, 100)], 5))
    assert img.fluid_mask[0].all() and img.solid_mask[1:].all()
    assert (generate(Homogeneous(42, 3)).porosity == 42).all()


@pytest.mark.parametrize(
    "make",
    [
        lambda: SphereArray(1.2, 10),
        lambda: Channel(12, 10),
        lambda: BlockedChannel(4, 60, 11, 10),
        lambda: BlockedChannel(4, 160, 2, 10),
        lambda: Layered("z", [(3, 10), (3, 20)], 10),
        lambda: Layered("w", [(10, 10)], 10),
        lambda: Homogeneous(101, 4),
        lambda: Homogeneous(50, 0),
    ],
)
def test_spec_errors(make):
    with pytest.raises((SpecError, ValueError)):
        make()


def test_table1_suite():
    suite = table1_suite()
    assert len(suite) == 18
    lookup = {(c.spec.D, c.spec.n): c.expected for c in suite}
    assert lookup[(0.2, 80)] == 3.78e-1
    assert lookup[(0.6, 160)] == 4.43e-2
    assert lookup[(1.0, 40)] == 2.48e-3
    assert lookup[(0.1, 80)] == 9.01e-1
    assert lookup[(0.4, 80)] == 1.22e-1
    assert lookup[(0.8, 160)] == 1.31e-2
    assert lookup[(1.0, 160)] == 2.51e-3
    assert all(c.tolerance == 0.03 for c in suite)
