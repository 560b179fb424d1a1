"""Staggered (MAC) finite-difference operators on voxel images.

Pressure lives at the centers of non-solid voxels, velocity components on the
voxel faces. The image is first permuted so that the flow direction is the
last axis of the solver frame. Every momentum row is scaled by its control
volume over ``h**3``; inlet/outlet faces own half a control volume, which
keeps ``A`` symmetric and makes ``B^T`` the exact transpose of ``B``:

    A u + B^T p = f,    B u = 0,    B = -div,  B^T = grad

Boundary handling (pressure-drop):
  * tangential walls and solid voxels are no-slip;
  * a face position lying on a wall (one side solid) carries u = 0;
  * a face position buried in solid mirrors the unknown (wall half way);
  * du/dn = 0 at inlet/outlet: no flux through the outer half cell;
  * p_in / p_out enter f at the inlet/outlet faces, half a voxel away.

Periodic: every axis wraps and f carries a unit body force along the flow
axis. The mean pressure is then undetermined and fixed by the solver.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .classify import axis_index
from .krylov.csr import as_csr
from .voxel import MKDA_TO_M2, PhysicalScale, VoxelClass, VoxelImage, correlation_permeability

SOLID_POS, WALL_POS, DOF_POS, NEUMANN_POS = 0, 1, 2, 3


class ConfigurationError(ValueError):
    """Model, boundary condition and geometry do not fit together."""


class AssemblyError(RuntimeError):
    pass


class Model(str, enum.Enum):
    STOKES = "stokes"
    STOKES_BRINKMAN = "stokes_brinkman"
    BRINKMAN = "brinkman"
    DARCY = "darcy"

    @classmethod
    def parse(cls, value) -> "Model":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("-", "_")
        for m in cls:
            if m.value == key or m.name.lower() == key:
                return m
        raise ConfigurationError(f"unknown model {value!r}")

    @property
    def viscous(self) -> bool:
        return self is not Model.DARCY

    @property
    def perturbed(self) -> bool:
        """Fluid voxels carry the fictitious permeability."""
        return self in (Model.BRINKMAN, Model.DARCY)


class BoundaryCondition(str, enum.Enum):
    PRESSURE_DROP = "pressure-drop"
    PERIODIC = "periodic"

    @classmethod
    def parse(cls, value) -> "BoundaryCondition":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("_", "-")
        for b in cls:
            if b.value == key:
                return b
        raise ConfigurationError(f"unknown boundary condition {value!r}")


def frame_order(direction) -> tuple[int, int, int]:
    """Axis permutation putting the flow direction last."""
    return {0: (1, 2, 0), 1: (2, 0, 1), 2: (0, 1, 2)}[axis_index(direction)]


# -- inverse permeability ---------------------------------------------------

def kstokes_inverse(scale: PhysicalScale, k_stokes_mkda: float) -> float:
    return scale.L**2 / (k_stokes_mkda * MKDA_TO_M2)


def cell_inverse_permeability(porosity, scale: PhysicalScale, model: Model, k_stokes=None) -> np.ndarray:
    """Dimensionless inverse permeability per voxel (solid voxels get NaN)."""
    model = Model.parse(model)
    phi = np.asarray(porosity)
    kappa = np.full(phi.shape, np.nan)
    porous = (phi > 0) & (phi < 100)
    if porous.any():
        kappa[porous] = scale.L**2 / (correlation_permeability(phi[porous]) * MKDA_TO_M2)
    fluid = phi == 0
    if model.perturbed:
        if fluid.any():
            if k_stokes is None:
                raise ConfigurationError(
                    f"{model.value} needs a fictitious permeability K_stokes for fluid voxels"
                )
            kappa[fluid] = kstokes_inverse(scale, k_stokes)
    else:
        kappa[fluid] = 0.0
    return kappa


def face_inverse_permeability(left, right, scale: PhysicalScale, k_stokes=None, model=Model.STOKES_BRINKMAN) -> float:
    """Arithmetic mean of the two neighbouring inverse permeabilities.

    ``left``/``right`` are porosity percentages (or VoxelClass.FLUID).
    """
    vals = []
    for side in (left, right):
        if isinstance(side, VoxelClass):
            if side is VoxelClass.POROUS:
                raise ValueError("pass the porosity value for porous voxels")
            side = 0 if side is VoxelClass.FLUID else 100
        if VoxelClass.of(int(side)) is VoxelClass.SOLID:
            raise ValueError("solid voxels carry no velocity unknowns")
        vals.append(int(side))
    kappa = cell_inverse_permeability(np.array(vals), scale, model, k_stokes)
    return float(0.5 * (kappa[0] + kappa[1]))


# -- grid -------------------------------------------------------------------

def _shift(arr: np.ndarray, step: int, axis: int, wrap: bool, fill):
    """out[s] = arr[s + step] along ``axis`` (wrapped, or ``fill`` outside)."""
    if wrap:
        return np.roll(arr, -step, axis=axis)
    out = np.full_like(arr, fill)
    n = arr.shape[axis]
    src = [slice(None)] * arr.ndim
    dst = [slice(None)] * arr.ndim
    if step > 0:
        src[axis] = slice(step, n)
        dst[axis] = slice(0, n - step)
    else:
        src[axis] = slice(0, n + step)
        dst[axis] = slice(-step, n)
    out[tuple(dst)] = arr[tuple(src)]
    return out


def _flat_f(a):
    return a.ravel(order="F")


@dataclass
class FaceSet:
    """Face positions of one velocity component (in the solver frame)."""

    axis: int
    mode: str                 # 'periodic' | 'wall' | 'open'
    left: np.ndarray          # cell index of the lower neighbour, -1 if none/solid
    right: np.ndarray
    state: np.ndarray         # SOLID_POS | WALL_POS | DOF_POS
    index: np.ndarray         # global velocity DOF index, -1 if not a DOF
    weight: np.ndarray        # control-volume fraction (1 or 1/2)


@dataclass
class StaggeredGrid:
    dims: tuple[int, int, int]            # solver frame, flow along the last axis
    order: tuple[int, int, int]           # frame = image.transpose(order)
    h: float
    periodic: bool
    cell_index: np.ndarray                # frame-shaped, -1 for solid
    faces: list[FaceSet]
    n_p: int
    n_u: int
    face_axis: np.ndarray                 # per DOF
    face_plane: np.ndarray                # per DOF: position along its own axis
    face_weight: np.ndarray               # per DOF

    @property
    def flow_length(self) -> float:
        return self.dims[2] * self.h

    @property
    def n_voxels(self) -> int:
        return int(np.prod(self.dims))

    def to_frame(self, arr: np.ndarray) -> np.ndarray:
        return np.transpose(arr, self.order)

    def from_frame(self, arr: np.ndarray) -> np.ndarray:
        return np.transpose(arr, np.argsort(self.order))


def build_grid(active: np.ndarray, h: float, periodic: bool, order=(0, 1, 2)) -> StaggeredGrid:
    """Index maps for an ``active`` (non-solid) mask already in the solver frame."""
    active = np.asarray(active, dtype=bool)
    dims = active.shape
    cell_index = np.full(dims, -1, dtype=np.int64)
    flat = _flat_f(active)
    ci_flat = np.full(flat.size, -1, dtype=np.int64)
    ci_flat[flat] = np.arange(int(flat.sum()))
    cell_index = ci_flat.reshape(dims, order="F")
    n_p = int(flat.sum())

    faces = []
    offset = 0
    axes, planes, weights = [], [], []
    for a in range(3):
        mode = "periodic" if periodic else ("open" if a == 2 else "wall")
        if mode == "periodic":
            left = np.roll(cell_index, 1, axis=a)
            right = cell_index.copy()
            left_act, right_act = left >= 0, right >= 0
        else:
            pad = [(0, 0)] * 3
            pad[a] = (1, 1)
            padded = np.pad(cell_index, pad, constant_values=-1)
            n = dims[a]
            left = np.take(padded, np.arange(0, n + 1), axis=a)
            right = np.take(padded, np.arange(1, n + 2), axis=a)
            left_act, right_act = left >= 0, right >= 0
            if mode == "open":
                # outside the inlet/outlet mirrors the boundary layer
                sl0 = [slice(None)] * 3
                sl0[a] = 0
                slN = [slice(None)] * 3
                slN[a] = n
                left_act[tuple(sl0)] = right_act[tuple(sl0)]
                right_act[tuple(slN)] = left_act[tuple(slN)]
        dof = left_act & right_act
        state = np.where(dof, DOF_POS, np.where(left_act ^ right_act, WALL_POS, SOLID_POS)).astype(np.int8)
        weight = np.ones(dof.shape)
        if mode == "open":
            sl0 = [slice(None)] * 3
            sl0[a] = 0
            slN = [slice(None)] * 3
            slN[a] = dims[a]
            weight[tuple(sl0)] = 0.5
            weight[tuple(slN)] = 0.5
        dflat = _flat_f(dof)
        idx = np.full(dflat.size, -1, dtype=np.int64)
        nd = int(dflat.sum())
        idx[dflat] = offset + np.arange(nd)
        index = idx.reshape(dof.shape, order="F")
        faces.append(FaceSet(a, mode, left, right, state, index, weight))
        plane = np.broadcast_to(
            np.arange(dof.shape[a]).reshape([-1 if k == a else 1 for k in range(3)]), dof.shape
        )
        axes.append(np.full(nd, a, dtype=np.int8))
        planes.append(_flat_f(plane)[dflat])
        weights.append(_flat_f(weight)[dflat])
        offset += nd

    return StaggeredGrid(
        dims=tuple(int(d) for d in dims),
        order=tuple(order),
        h=float(h),
        periodic=periodic,
        cell_index=cell_index,
        faces=faces,
        n_p=n_p,
        n_u=offset,
        face_axis=np.concatenate(axes),
        face_plane=np.concatenate(planes).astype(np.int64),
        face_weight=np.concatenate(weights),
    )


def _laplacian(grid: StaggeredGrid) -> sp.csr_matrix:
    """Volume-weighted negative vector Laplacian (-Lambda) on the velocity DOFs."""
    h2 = grid.h**2
    rows, cols, vals = [], [], []
    diag = np.zeros(grid.n_u)
    for fs in grid.faces:
        a = fs.axis
        dof = fs.index >= 0
        idx = fs.index[dof]
        for b in range(3):
            wrap = grid.periodic
            if b == a:
                coef = np.full(idx.shape, 1.0 / h2)
                outside = NEUMANN_POS if fs.mode == "open" else SOLID_POS
            else:
                coef = fs.weight[dof] / h2
                outside = NEUMANN_POS if (not wrap and b == 2) else SOLID_POS
            for step in (-1, 1):
                nb_state = _shift(fs.state, step, b, wrap, outside)[dof]
                nb_index = _shift(fs.index, step, b, wrap, -1)[dof]
                is_dof = nb_state == DOF_POS
                rows.append(idx[is_dof])
                cols.append(nb_index[is_dof])
                vals.append(-coef[is_dof])
                mult = np.select(
                    [is_dof, nb_state == WALL_POS, nb_state == SOLID_POS], [1.0, 1.0, 2.0], 0.0
                )
                np.add.at(diag, idx, mult * coef)
    rows.append(np.arange(grid.n_u))
    cols.append(np.arange(grid.n_u))
    vals.append(diag)
    L = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.n_u, grid.n_u),
    )
    return as_csr(L)


def _divergence(grid: StaggeredGrid) -> sp.csr_matrix:
    """B = -div, rows = cells, columns = velocity DOFs (scaled by 1/h)."""
    rows, cols, vals = [], [], []
    for fs in grid.faces:
        dof = fs.index >= 0
        idx = fs.index[dof]
        left = fs.left[dof]
        right = fs.right[dof]
        has_l = left >= 0
        has_r = right >= 0
        rows += [left[has_l], right[has_r]]
        cols += [idx[has_l], idx[has_r]]
        vals += [np.full(has_l.sum(), -1.0 / grid.h), np.full(has_r.sum(), 1.0 / grid.h)]
    B = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.n_p, grid.n_u),
    )
    return as_csr(B)


def _face_kappa(grid: StaggeredGrid, kappa_cells: np.ndarray) -> np.ndarray:
    """Arithmetic mean of neighbouring cell values on every DOF face."""
    out = np.empty(grid.n_u)
    for fs in grid.faces:
        dof = fs.index >= 0
        left = fs.left[dof]
        right = fs.right[dof]
        left = np.where(left >= 0, left, right)
        right = np.where(right >= 0, right, left)
        out[fs.index[dof]] = 0.5 * (kappa_cells[left] + kappa_cells[right])
    return out


@dataclass
class OperatorSet:
    grid: StaggeredGrid
    model: Model
    bc: BoundaryCondition
    A: sp.csr_matrix
    B: sp.csr_matrix
    BT: sp.csr_matrix
    kinv: np.ndarray              # face inverse permeability (unweighted)
    f: np.ndarray
    pressure_drop: tuple[float, float]
    scale: PhysicalScale
    laplacian: sp.csr_matrix | None = None
    k_stokes: float | None = None

    @property
    def D(self) -> np.ndarray:
        return self.A.diagonal()

    @property
    def n_u(self) -> int:
        return self.grid.n_u

    @property
    def n_p(self) -> int:
        return self.grid.n_p

    @property
    def is_diagonal(self) -> bool:
        return self.model is Model.DARCY

    @property
    def body_force(self) -> float:
        return 1.0 if self.bc is BoundaryCondition.PERIODIC else 0.0


def _check_len(v, n, what):
    v = np.asarray(v)
    if v.shape != (n,):
        raise ValueError(f"{what} vector has shape {v.shape}, expected ({n},)")
    return v


def apply_A(op: OperatorSet, v) -> np.ndarray:
    return op.A @ _check_len(v, op.n_u, "velocity")


def apply_B(op: OperatorSet, v) -> np.ndarray:
    return op.B @ _check_len(v, op.n_u, "velocity")


def apply_BT(op: OperatorSet, p) -> np.ndarray:
    return op.BT @ _check_len(p, op.n_p, "pressure")


def build_operators(
    image: VoxelImage,
    model=Model.STOKES_BRINKMAN,
    bc=BoundaryCondition.PRESSURE_DROP,
    pressure_drop=(1.0, 0.0),
    k_stokes=None,
    direction="z",
    kinv_field=None,
) -> OperatorSet:
    """Assemble A, B, B^T, K^-1 and f for one model on a preprocessed image.

    ``kinv_field`` optionally replaces the porosity-based inverse permeability
    with a per-voxel dimensionless field (image-shaped; ignored on solid).
    """
    model = Model.parse(model)
    bc = BoundaryCondition.parse(bc)
    order = frame_order(direction)
    phi = np.transpose(image.porosity, order)
    active = phi < 100
    if not active.any():
        raise ConfigurationError("image has no fluid or porous voxels")

    if kinv_field is not None:
        kappa = np.transpose(np.asarray(kinv_field, dtype=float), order)
        if model is Model.STOKES:
            raise ConfigurationError("the Stokes model takes no inverse permeability")
        if model.perturbed and np.any(kappa[active] <= 0):
            raise ConfigurationError(f"{model.value} needs a strictly positive inverse permeability")
    else:
        porous = (phi > 0) & active
        if model is Model.STOKES and porous.any():
            raise ConfigurationError(
                "Stokes model requested on an image with porous voxels; use stokes_brinkman"
            )
        kappa = cell_inverse_permeability(phi, image.scale, model, k_stokes)

    h = 1.0 / max(image.dims)
    grid = build_grid(active, h, bc is BoundaryCondition.PERIODIC, order)
    kappa_cells = _flat_f(kappa)[_flat_f(active)]
    kinv = _face_kappa(grid, kappa_cells)
    drag = sp.diags(grid.face_weight * kinv) if model is not Model.STOKES else None

    lap = _laplacian(grid) if model.viscous else None
    if model is Model.STOKES:
        A = lap
    elif model is Model.DARCY:
        A = as_csr(drag)
    else:
        A = as_csr(lap + drag)
    B = _divergence(grid)
    BT = as_csr(B.T)

    p_in, p_out = (float(v) for v in pressure_drop)
    f = np.zeros(grid.n_u)
    flow = grid.faces[2]
    if bc is BoundaryCondition.PERIODIC:
        f[flow.index[flow.index >= 0]] = 1.0
    else:
        nz = grid.dims[2]
        inlet = flow.index[:, :, 0]
        outlet = flow.index[:, :, nz]
        f[inlet[inlet >= 0]] = p_in / h
        f[outlet[outlet >= 0]] = -p_out / h

    if model.perturbed and not np.all(kinv > 0):
        bad = int(np.flatnonzero(~(kinv > 0))[0])
        raise AssemblyError(f"non-positive inverse permeability on velocity face {bad}")

    return OperatorSet(
        grid=grid, model=model, bc=bc, A=A, B=B, BT=BT, kinv=kinv, f=f,
        pressure_drop=(p_in, p_out), scale=image.scale, laplacian=lap, k_stokes=k_stokes,
    )
