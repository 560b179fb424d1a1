"""Pore-space connectivity: isolated-region removal and percolation categories.

Connectivity is 6-face adjacency, matching the staggered velocity unknowns:
flow only crosses voxel faces. Components are found with a disjoint-set union
over the voxel grid.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numba
import numpy as np

from .voxel import SOLID, VoxelImage

AXES = {"x": 0, "y": 1, "z": 2}


def axis_index(direction) -> int:
    if isinstance(direction, str):
        try:
            return AXES[direction.lower()]
        except KeyError:
            raise ValueError(f"unknown direction {direction!r}") from None
    if direction in (0, 1, 2):
        return int(direction)
    raise ValueError(f"unknown direction {direction!r}")


class Category(str, enum.Enum):
    A = "A"
    B = "B"
    NON_PERCOLATING = "NonPercolating"


@numba.njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@numba.njit(cache=True)
def _union(parent, rank, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return ra
    if rank[ra] < rank[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    if rank[ra] == rank[rb]:
        rank[ra] += 1
    return ra


class DisjointSet:
    """Union by rank with path compression."""

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)
        self.rank = np.zeros(n, dtype=np.int64)

    def find(self, x: int) -> int:
        return int(_find(self.parent, x))

    def union(self, a: int, b: int) -> int:
        return int(_union(self.parent, self.rank, a, b))

    def __len__(self):
        return len(self.parent)


@numba.njit(cache=True)
def _label_kernel(mask, nx, ny, nz, periodic):
    # mask is flat, x-fastest
    n = nx * ny * nz
    parent = np.arange(n)
    rank = np.zeros(n, dtype=np.int64)
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                i = x + nx * (y + ny * z)
                if not mask[i]:
                    continue
                if x + 1 < nx:
                    if mask[i + 1]:
                        _union(parent, rank, i, i + 1)
                elif periodic[0] and nx > 1:
                    j = i - (nx - 1)
                    if mask[j]:
                        _union(parent, rank, i, j)
                if y + 1 < ny:
                    if mask[i + nx]:
                        _union(parent, rank, i, i + nx)
                elif periodic[1] and ny > 1:
                    j = i - nx * (ny - 1)
                    if mask[j]:
                        _union(parent, rank, i, j)
                if z + 1 < nz:
                    if mask[i + nx * ny]:
                        _union(parent, rank, i, i + nx * ny)
                elif periodic[2] and nz > 1:
                    j = i - nx * ny * (nz - 1)
                    if mask[j]:
                        _union(parent, rank, i, j)
    labels = np.full(n, -1, dtype=np.int64)
    root_label = np.full(n, -1, dtype=np.int64)
    count = 0
    for i in range(n):
        if mask[i]:
            r = _find(parent, i)
            if root_label[r] < 0:
                root_label[r] = count
                count += 1
            labels[i] = root_label[r]
    return labels, count


def label_components(mask: np.ndarray, periodic=(False, False, False)) -> tuple[np.ndarray, int]:
    """Label face-connected components of a boolean ``mask[x, y, z]``.

    Labels are dense integers from 0 in x-fastest order of first appearance;
    voxels outside the mask get -1.
    """
    mask = np.asarray(mask, dtype=bool)
    nx, ny, nz = mask.shape
    flat = np.ascontiguousarray(mask.ravel(order="F"))
    labels, count = _label_kernel(flat, nx, ny, nz, np.array(periodic, dtype=np.bool_))
    return labels.reshape(mask.shape, order="F"), int(count)


def _spanning_labels(labels: np.ndarray, count: int, axis: int) -> np.ndarray:
    """Boolean per label: component touches both the first and last layer along axis."""
    first = np.take(labels, 0, axis=axis)
    last = np.take(labels, labels.shape[axis] - 1, axis=axis)
    inlet = np.zeros(count, dtype=bool)
    outlet = np.zeros(count, dtype=bool)
    inlet[first[first >= 0]] = True
    outlet[last[last >= 0]] = True
    return inlet & outlet


def percolates(mask: np.ndarray, direction) -> bool:
    axis = axis_index(direction)
    labels, count = label_components(mask)
    return bool(count and _spanning_labels(labels, count, axis).any())


def remove_isolated(image: VoxelImage, direction) -> tuple[VoxelImage, int]:
    """Turn every non-solid component not linking inlet to outlet into solid."""
    axis = axis_index(direction)
    pore = image.pore_mask
    labels, count = label_components(pore)
    if count == 0:
        return image, 0
    keep = _spanning_labels(labels, count, axis)
    dead = pore & ~np.where(labels >= 0, keep[np.maximum(labels, 0)], False)
    removed = int(dead.sum())
    if removed == 0:
        return image, 0
    out = image.porosity.copy()
    out[dead] = SOLID
    return image.with_porosity(out), removed


@dataclass(frozen=True)
class ConnectivityReport:
    category: Category
    removed_voxels: int
    component_count: int
    direction: str

    @property
    def stokes_connected(self) -> bool:
        return self.category is Category.B

    @property
    def brinkman_connected(self) -> bool:
        return self.category is not Category.NON_PERCOLATING


def preprocess(image: VoxelImage, direction="z") -> tuple[VoxelImage, ConnectivityReport]:
    """Remove isolated regions and classify; returns the cleaned image as well."""
    axis = axis_index(direction)
    cleaned, removed = remove_isolated(image, axis)
    _, count = label_components(cleaned.pore_mask)
    if count == 0:
        category = Category.NON_PERCOLATING
    elif percolates(cleaned.fluid_mask, axis):
        category = Category.B
    else:
        category = Category.A
    return cleaned, ConnectivityReport(category, removed, count, "xyz"[axis])


def classify(image: VoxelImage, direction="z") -> ConnectivityReport:
    """Percolation category along ``direction``.

    NonPercolating: fluid+porous space does not link inlet to outlet.
    A: it does, but pure fluid alone does not. B: pure fluid percolates.
    """
    return preprocess(image, direction)[1]
