"""Voxel image model, raw I/O, ternary segmentation and porosity statistics.

A voxel image stores one integer porosity percentage per voxel:

    0        pure fluid (resolved pore)
    1..99    porous voxel (unresolved, sub-voxel porosity)
    100      solid

Raw files are unsigned 8-bit, x-fastest (x, then y, then z). Dimensions are not
stored in the file; they come from the caller or from a sidecar ``.meta`` file
holding ``key=value`` lines (``nx``, ``ny``, ``nz``, ``L_meters``).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

DARCY_TO_M2 = 9.869233e-13
MKDA_TO_M2 = DARCY_TO_M2 * 1e-6

FLUID = 0
SOLID = 100

# porosity -> permeability correlation, K [mkDa] = a * exp(b * phi)
CORRELATION_PREFACTOR = 7.251e-2
CORRELATION_RATE = 0.147076689

DEFAULT_LENGTH = 0.0009


class DimensionError(ValueError):
    pass


class InvalidPorosityError(ValueError):
    pass


class SidecarError(ValueError):
    pass


class VoxelClass(enum.Enum):
    FLUID = "fluid"
    POROUS = "porous"
    SOLID = "solid"

    @classmethod
    def of(cls, phi: int) -> "VoxelClass":
        if phi == FLUID:
            return cls.FLUID
        if phi == SOLID:
            return cls.SOLID
        if 0 < phi < 100:
            return cls.POROUS
        raise InvalidPorosityError(f"porosity {phi} outside [0, 100]")


@dataclass(frozen=True)
class PhysicalScale:
    """Characteristic sample length ``L`` in meters.

    Dimensionless permeabilities are converted with ``k = k_hat * L**2``.
    """

    L: float = DEFAULT_LENGTH
    darcy_to_m2: float = DARCY_TO_M2

    def __post_init__(self):
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValueError(f"sample length must be positive, got {self.L}")

    @property
    def mkda_to_m2(self) -> float:
        return self.darcy_to_m2 * 1e-6

    def to_physical(self, k_hat: float) -> float:
        return k_hat * self.L**2

    def to_dimensionless(self, k_m2: float) -> float:
        return k_m2 / self.L**2


@dataclass(frozen=True, eq=False)
class VoxelImage:
    """Porosity map indexed ``porosity[x, y, z]``.

    The array is stored read-only; every operation returns a new image.
    """

    porosity: np.ndarray
    scale: PhysicalScale = field(default_factory=PhysicalScale)

    def __post_init__(self):
        arr = np.asarray(self.porosity)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise DimensionError(f"expected a non-empty 3D array, got shape {arr.shape}")
        if arr.size and (arr.min() < 0 or arr.max() > 100):
            flat = arr.ravel(order="F")
            bad = int(np.flatnonzero((flat < 0) | (flat > 100))[0])
            raise InvalidPorosityError(f"invalid porosity value at linear index {bad}")
        arr = np.array(arr, dtype=np.uint8, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "porosity", arr)

    @classmethod
    def from_linear(cls, values, dims, scale: PhysicalScale | None = None) -> "VoxelImage":
        """Build from a flat x-fastest sequence."""
        values = np.asarray(values)
        nx, ny, nz = dims
        if values.size != nx * ny * nz:
            raise DimensionError(
                f"dimension error: {values.size} values for dims {tuple(dims)} "
                f"(expected {nx * ny * nz})"
            )
        bad = np.flatnonzero((values < 0) | (values > 100))
        if bad.size:
            raise InvalidPorosityError(f"invalid porosity value at linear index {int(bad[0])}")
        return cls(values.reshape((nx, ny, nz), order="F"), scale or PhysicalScale())

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.porosity.shape)

    @property
    def size(self) -> int:
        return int(self.porosity.size)

    @property
    def fluid_mask(self) -> np.ndarray:
        return self.porosity == FLUID

    @property
    def solid_mask(self) -> np.ndarray:
        return self.porosity == SOLID

    @property
    def porous_mask(self) -> np.ndarray:
        return (self.porosity > FLUID) & (self.porosity < SOLID)

    @property
    def pore_mask(self) -> np.ndarray:
        """Non-solid voxels (fluid or porous)."""
        return self.porosity < SOLID

    @property
    def is_binary(self) -> bool:
        return not self.porous_mask.any()

    def linear(self) -> np.ndarray:
        return self.porosity.ravel(order="F")

    def voxel_class(self, x: int, y: int, z: int) -> VoxelClass:
        return VoxelClass.of(int(self.porosity[x, y, z]))

    def class_counts(self) -> dict[VoxelClass, int]:
        return {
            VoxelClass.FLUID: int(self.fluid_mask.sum()),
            VoxelClass.POROUS: int(self.porous_mask.sum()),
            VoxelClass.SOLID: int(self.solid_mask.sum()),
        }

    def with_porosity(self, porosity: np.ndarray) -> "VoxelImage":
        return VoxelImage(porosity, self.scale)

    def with_scale(self, scale: PhysicalScale) -> "VoxelImage":
        return VoxelImage(self.porosity, scale)

    def __eq__(self, other):
        if not isinstance(other, VoxelImage):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.scale == other.scale
            and np.array_equal(self.porosity, other.porosity)
        )

    __hash__ = None


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".meta")


def read_sidecar(path) -> dict:
    """Parse a flat ``key=value`` metadata file. Unknown keys are kept as strings."""
    meta = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SidecarError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key in ("nx", "ny", "nz"):
                meta[key] = int(value)
            elif key == "L_meters":
                meta[key] = float(value)
            else:
                meta[key] = value
        except ValueError as exc:
            raise SidecarError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return meta


def write_sidecar(path, dims, L: float) -> None:
    nx, ny, nz = dims
    Path(path).write_text(f"nx={nx}\nny={ny}\nnz={nz}\nL_meters={L!r}\n", encoding="utf-8")


def load_raw(path, dims=None, L: float | None = None) -> VoxelImage:
    """Read an 8-bit porosity raw file.

    ``dims`` and ``L`` override the sidecar; at least one source must give dims.
    """
    path = Path(path)
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        meta = read_sidecar(side)
    if dims is None:
        try:
            dims = (meta["nx"], meta["ny"], meta["nz"])
        except KeyError:
            raise DimensionError(
                f"dimension error: no dims given and no complete sidecar for {path}"
            ) from None
    if L is None:
        L = meta.get("L_meters", DEFAULT_LENGTH)
    data = np.fromfile(path, dtype=np.uint8)
    return VoxelImage.from_linear(data, tuple(int(d) for d in dims), PhysicalScale(L))


def save_raw(image: VoxelImage, path, sidecar: bool = False) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(image.linear().astype(np.uint8).tobytes())
    if sidecar:
        write_sidecar(sidecar_path(path), image.dims, image.scale.L)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def segment_ternary(image: VoxelImage, threshold: int) -> tuple[VoxelImage, int | None]:
    """Multiclass -> ternary segmentation.

    Porous voxels with porosity >= ``threshold`` become fluid; the remaining
    porous voxels all receive the rounded mean of their porosities. Returns the
    new image and that mean, or ``None`` when no porous voxel survives (the
    result is then binary).
    """
    if not 0 < threshold <= 100:
        raise ValueError(f"threshold must lie in (0, 100], got {threshold}")
    phi = image.porosity.astype(np.int64)
    porous = (phi > FLUID) & (phi < SOLID)
    opened = porous & (phi >= threshold)
    kept = porous & ~opened
    out = phi.copy()
    out[opened] = FLUID
    if not kept.any():
        return image.with_porosity(out), None
    avg = round_half_up(phi[kept].mean())
    # a mean of values in [1, 99] stays in [1, 99]
    out[kept] = avg
    return image.with_porosity(out), avg


def correlation_permeability(phi) -> float | np.ndarray:
    """Porous-voxel permeability in mkDa from porosity percent (0 < phi < 100)."""
    arr = np.asarray(phi, dtype=float)
    if np.any((arr <= 0) | (arr >= 100)):
        raise ValueError(f"porosity must lie strictly inside (0, 100), got {phi}")
    k = CORRELATION_PREFACTOR * np.exp(CORRELATION_RATE * arr)
    return float(k) if k.ndim == 0 else k


class PorosityStats(NamedTuple):
    total: float
    resolved: float
    unresolved: float


def porosity_stats(image: VoxelImage) -> PorosityStats:
    """Resolved (fluid fraction) and unresolved (sum of porous phi/100) porosity."""
    n = image.size
    resolved = image.fluid_mask.sum() / n
    porous = image.porosity[image.porous_mask].astype(np.int64)
    unresolved = porous.sum() / 100.0 / n
    return PorosityStats(float(resolved + unresolved), float(resolved), float(unresolved))
