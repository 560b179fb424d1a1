"""Deterministic validation geometries and connectivity fixtures.

Every generator is a pure function of its spec. Lengths of ducts and slabs are
given in voxels; sphere diameters are fractions of the unit cube.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .classify import axis_index
from .voxel import DEFAULT_LENGTH, FLUID, SOLID, PhysicalScale, VoxelImage


class SpecError(ValueError):
    pass


def _check_phi(phi, what="porosity"):
    if not 0 <= phi <= 100:
        raise SpecError(f"{what} {phi} outside [0, 100]")


def _check_n(n):
    if int(n) < 1:
        raise SpecError(f"grid size must be positive, got {n}")


@dataclass(frozen=True)
class SphereArray:
    """One solid sphere of diameter ``D`` centered in an ``N^3`` periodic cell."""

    D: float
    n: int
    L: float = DEFAULT_LENGTH

    def __post_init__(self):
        _check_n(self.n)
        if not 0 <= self.D <= 1:
            raise SpecError(f"sphere diameter {self.D} exceeds the unit cube")


@dataclass(frozen=True)
class Channel:
    """Square fluid duct of ``width`` voxels along ``axis`` through a uniform matrix."""

    width: int
    n: int
    matrix_phi: int = SOLID
    axis: str = "z"
    L: float = DEFAULT_LENGTH

    def __post_init__(self):
        _check_n(self.n)
        _check_phi(self.matrix_phi, "matrix porosity")
        if not 0 <= self.width <= self.n:
            raise SpecError(f"channel width {self.width} exceeds the grid size {self.n}")


@dataclass(frozen=True)
class BlockedChannel:
    """A channel interrupted at mid-length by a cross-sectional slab of porosity ``slab_phi``."""

    width: int
    slab_phi: int
    slab_thickness: int
    n: int
    matrix_phi: int = SOLID
    axis: str = "z"
    L: float = DEFAULT_LENGTH

    def __post_init__(self):
        _check_n(self.n)
        _check_phi(self.slab_phi, "slab porosity")
        _check_phi(self.matrix_phi, "matrix porosity")
        if not 0 <= self.width <= self.n:
            raise SpecError(f"channel width {self.width} exceeds the grid size {self.n}")
        if not 0 < self.slab_thickness <= self.n:
            raise SpecError(f"slab thickness {self.slab_thickness} outside (0, {self.n}]")


@dataclass(frozen=True)
class Layered:
    """Constant-porosity slabs stacked along ``axis``; ``layers`` holds (thickness, phi)."""

    axis: str
    layers: tuple
    n: int
    L: float = DEFAULT_LENGTH

    def __post_init__(self):
        _check_n(self.n)
        object.__setattr__(self, "layers", tuple((int(t), int(p)) for t, p in self.layers))
        if not self.layers:
            raise SpecError("at least one layer is required")
        for t, p in self.layers:
            _check_phi(p, "layer porosity")
            if t <= 0:
                raise SpecError(f"layer thickness must be positive, got {t}")
        total = sum(t for t, _ in self.layers)
        if total != self.n:
            raise SpecError(f"layer thicknesses sum to {total}, expected {self.n}")
        axis_index(self.axis)


@dataclass(frozen=True)
class Homogeneous:
    phi: int
    n: int
    L: float = DEFAULT_LENGTH

    def __post_init__(self):
        _check_n(self.n)
        _check_phi(self.phi)


GeometrySpec = Union[SphereArray, Channel, BlockedChannel, Layered, Homogeneous]


def _centered(n: int, width: int) -> slice:
    lo = (n - width) // 2
    return slice(lo, lo + width)


def _axis_first(arr: np.ndarray, axis: int) -> np.ndarray:
    """View with ``axis`` moved last, so duct geometry can be written once for z."""
    return np.moveaxis(arr, axis, 2)


def sphere_array(D: float, n: int) -> np.ndarray:
    c = (np.arange(n) + 0.5) / n - 0.5
    r2 = c[:, None, None] ** 2 + c[None, :, None] ** 2 + c[None, None, :] ** 2
    return np.where(r2 < (D / 2) ** 2, SOLID, FLUID).astype(np.uint8)


def generate(spec: GeometrySpec) -> VoxelImage:
    """Voxelize a geometry spec (voxel-center membership, no antialiasing)."""
    n = int(spec.n)
    scale = PhysicalScale(spec.L)
    if isinstance(spec, SphereArray):
        return VoxelImage(sphere_array(spec.D, n), scale)
    if isinstance(spec, Homogeneous):
        return VoxelImage(np.full((n, n, n), spec.phi, np.uint8), scale)
    if isinstance(spec, Layered):
        por = np.empty((n, n, n), np.uint8)
        view = _axis_first(por, axis_index(spec.axis))
        z = 0
        for t, phi in spec.layers:
            view[:, :, z:z + t] = phi
            z += t
        return VoxelImage(por, scale)
    if isinstance(spec, (Channel, BlockedChannel)):
        por = np.full((n, n, n), spec.matrix_phi, np.uint8)
        view = _axis_first(por, axis_index(spec.axis))
        duct = _centered(n, spec.width)
        view[duct, duct, :] = FLUID
        if isinstance(spec, BlockedChannel):
            view[duct, duct, _centered(n, spec.slab_thickness)] = spec.slab_phi
        return VoxelImage(por, scale)
    raise SpecError(f"unknown geometry spec {spec!r}")


class Table1Case(NamedTuple):
    spec: SphereArray
    expected: float
    tolerance: float


# computed dimensionless permeability of a periodic sphere array, indexed (D, N)
TABLE1 = {
    (0.1, 40): 9.74e-1, (0.1, 80): 9.01e-1, (0.1, 160): 9.02e-1,
    (0.2, 40): 3.77e-1, (0.2, 80): 3.78e-1, (0.2, 160): 3.80e-1,
    (0.4, 40): 1.21e-1, (0.4, 80): 1.22e-1, (0.4, 160): 1.23e-1,
    (0.6, 40): 4.44e-2, (0.6, 80): 4.43e-2, (0.6, 160): 4.43e-2,
    (0.8, 40): 1.29e-2, (0.8, 80): 1.31e-2, (0.8, 160): 1.31e-2,
    (1.0, 40): 2.48e-3, (1.0, 80): 2.51e-3, (1.0, 160): 2.51e-3,
}


def table1_suite(tolerance: float = 0.03) -> list[Table1Case]:
    """All (D, N) sphere-array cases with their reference permeabilities."""
    return [Table1Case(SphereArray(D, N), k, tolerance) for (D, N), k in TABLE1.items()]
