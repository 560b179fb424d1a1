"""Effective permeability, continuity diagnostics and VTK field export."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classify import Category, ConnectivityReport
from .grid import BoundaryCondition
from .voxel import MKDA_TO_M2, PhysicalScale, VoxelImage

log = logging.getLogger(__name__)


class DegenerateInputError(ValueError):
    pass


def mkda_to_m2(k):
    return k * MKDA_TO_M2


def m2_to_mkda(k):
    return k / MKDA_TO_M2


def _flow_faces(sol):
    grid = sol.ops.grid
    return np.flatnonzero(grid.face_axis == 2)


def darcy_velocity(sol, image: VoxelImage | None = None) -> float:
    """Flow-direction velocity averaged over the whole sample, solid included."""
    grid = sol.ops.grid
    faces = _flow_faces(sol)
    return float(np.sum(grid.face_weight[faces] * sol.u[faces]) / grid.n_voxels)


def outlet_flux_velocity(sol) -> float:
    """Q/A through the outlet plane (plane 0 for periodic problems)."""
    grid = sol.ops.grid
    faces = _flow_faces(sol)
    plane = 0 if grid.periodic else grid.dims[2]
    on_plane = faces[grid.face_plane[faces] == plane]
    return float(sol.u[on_plane].sum() / (grid.dims[0] * grid.dims[1]))


def divergence_norm(sol) -> float:
    return float(np.linalg.norm(sol.ops.B @ sol.u))


def continuity_ratio(sol) -> float:
    """||B u|| / ||B^T p||."""
    gp = np.linalg.norm(sol.ops.BT @ sol.p)
    return float(divergence_norm(sol) / gp) if gp > 0 else 0.0


@dataclass
class PermeabilityResult:
    k_hat: float
    scale: PhysicalScale
    direction: str
    darcy_velocity: float
    flux_velocity: float
    pressure_drop: tuple[float, float]
    model: str
    bc: str
    category: str | None = None
    rtol: float = 0.0
    iterations_outer: int = 0
    inner_iterations_total: int = 0
    wall_time_s: float = 0.0
    divergence_norm: float = 0.0
    k_hat_flux: float = 0.0
    cross_check: "PermeabilityResult | None" = None
    extra: dict = field(default_factory=dict)

    @property
    def k_m2(self) -> float:
        return self.k_hat * self.scale.L**2

    @property
    def k_mkda(self) -> float:
        return m2_to_mkda(self.k_m2)

    @property
    def dp(self) -> float:
        """Inlet minus outlet pressure."""
        return self.pressure_drop[0] - self.pressure_drop[1]

    @property
    def flux_mismatch(self) -> float:
        if self.k_hat == 0:
            return abs(self.k_hat_flux)
        return abs(self.k_hat_flux - self.k_hat) / abs(self.k_hat)

    @classmethod
    def zero(cls, scale, report: ConnectivityReport, direction, pressure_drop, rtol):
        return cls(
            k_hat=0.0, scale=scale, direction=str(report.direction), darcy_velocity=0.0,
            flux_velocity=0.0, pressure_drop=tuple(pressure_drop), model="none",
            bc=BoundaryCondition.PRESSURE_DROP.value, category=report.category.value, rtol=rtol,
        )

    def to_record(self) -> dict:
        rec = {
            "category": self.category,
            "model": self.model,
            "direction": self.direction,
            "k_hat": self.k_hat,
            "k_mkDa": self.k_mkda,
            "k_m2": self.k_m2,
            "darcy_velocity": self.darcy_velocity,
            "dp": self.dp,
            "rtol_S": self.rtol,
            "iterations_outer": self.iterations_outer,
            "inner_iterations_total": self.inner_iterations_total,
            "wall_time_s": self.wall_time_s,
            "divergence_norm": self.divergence_norm,
        }
        if self.cross_check is not None:
            rec["stokes_brinkman_check"] = self.cross_check.to_record()
        rec.update(self.extra)
        return rec


def effective_permeability(sol, image: VoxelImage | None = None, dp=None, category=None) -> PermeabilityResult:
    """Darcy-law permeability along the flow direction.

    Pressure drop: ``k_hat = -<u> * L_flow / (p_out - p_in)``; periodic:
    ``k_hat = <u> / f_body``. ``L_flow`` is 1 for cubic images.
    """
    ops = sol.ops
    grid = ops.grid
    u_avg = darcy_velocity(sol)
    u_flux = outlet_flux_velocity(sol)
    pressure_drop = tuple(ops.pressure_drop)
    if ops.bc is BoundaryCondition.PERIODIC:
        factor = 1.0 / ops.body_force
    else:
        if dp is None:
            dp = pressure_drop[1] - pressure_drop[0]
        if dp == 0:
            raise DegenerateInputError("pressure drop p_out - p_in is zero")
        factor = -grid.flow_length / dp
    direction = "xyz"[grid.order[2]]
    res = PermeabilityResult(
        k_hat=u_avg * factor,
        scale=ops.scale,
        direction=direction,
        darcy_velocity=u_avg,
        flux_velocity=u_flux,
        pressure_drop=pressure_drop,
        model=ops.model.value,
        bc=ops.bc.value,
        category=category.value if isinstance(category, Category) else category,
        rtol=sol.rtol,
        iterations_outer=sol.outer.iterations,
        inner_iterations_total=sol.inner_iterations,
        wall_time_s=sol.wall_time,
        divergence_norm=divergence_norm(sol),
        k_hat_flux=u_flux * factor,
    )
    if res.flux_mismatch > 10 * sol.rtol and res.k_hat != 0:
        log.warning(
            "volume-averaged and outlet-flux permeability differ by %.2e (rtol %.1e)",
            res.flux_mismatch, sol.rtol,
        )
    return res


# -- field export -------------------------------------------------------------

def cell_velocity(sol) -> np.ndarray:
    """Face velocities averaged to voxel centers, shape (nx, ny, nz, 3) in image axes."""
    grid = sol.ops.grid
    comps = []
    for fs in grid.faces:
        vals = np.where(fs.index >= 0, sol.u[np.maximum(fs.index, 0)], 0.0)
        if grid.periodic:
            upper = np.roll(vals, -1, axis=fs.axis)
        else:
            n = grid.dims[fs.axis]
            upper = np.take(vals, np.arange(1, n + 1), axis=fs.axis)
            vals = np.take(vals, np.arange(0, n), axis=fs.axis)
        comps.append(0.5 * (vals + upper))
    frame = np.stack(comps, axis=-1)
    inv = tuple(np.argsort(grid.order))
    image_axes = np.transpose(frame, inv + (3,))
    out = np.empty_like(image_axes)
    for a in range(3):
        out[..., grid.order[a]] = image_axes[..., a]
    return out


def cell_pressure(sol) -> np.ndarray:
    grid = sol.ops.grid
    p = np.where(grid.cell_index >= 0, sol.p[np.maximum(grid.cell_index, 0)], 0.0)
    return grid.from_frame(p)


def _write_block(fh, values, per_line=9):
    flat = np.asarray(values).ravel()
    for i in range(0, flat.size, per_line):
        fh.write(" ".join(f"{v:.9g}" for v in flat[i:i + per_line]) + "\n")


def export_fields(sol, image: VoxelImage, path, fmt: str = "vtk") -> None:
    """Legacy-VTK ASCII structured points: pressure, velocity, porosity at voxel centers."""
    if fmt != "vtk":
        raise ValueError(f"unsupported export format {fmt!r}")
    nx, ny, nz = image.dims
    h = 1.0 / max(image.dims)
    p = cell_pressure(sol)
    v = cell_velocity(sol)
    # VTK point order is x-fastest
    p_lin = p.ravel(order="F")
    v_lin = np.stack([v[..., k].ravel(order="F") for k in range(3)], axis=1)
    with open(Path(path), "w", encoding="utf-8") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"tightperm {sol.model.value} {sol.bc.value}\n")
        fh.write("ASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {nx} {ny} {nz}\n")
        fh.write(f"ORIGIN {h / 2:.9g} {h / 2:.9g} {h / 2:.9g}\n")
        fh.write(f"SPACING {h:.9g} {h:.9g} {h:.9g}\n")
        fh.write(f"POINT_DATA {nx * ny * nz}\n")
        fh.write("SCALARS pressure double 1\nLOOKUP_TABLE default\n")
        _write_block(fh, p_lin)
        fh.write("VECTORS velocity double\n")
        _write_block(fh, v_lin, per_line=9)
        fh.write("SCALARS porosity int 1\nLOOKUP_TABLE default\n")
        _write_block(fh, image.linear().astype(int))


def read_vtk_header(path) -> dict:
    """Parse the structured-points header and list the data arrays of a legacy VTK file."""
    info = {"arrays": []}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# vtk DataFile"):
        raise ValueError(f"{path} is not a legacy VTK file")
    info["title"] = lines[1]
    info["format"] = lines[2].strip()
    for line in lines[3:]:
        parts = line.split()
        if not parts:
            continue
        key = parts[0]
        if key == "DATASET":
            info["dataset"] = parts[1]
        elif key == "DIMENSIONS":
            info["dims"] = tuple(int(x) for x in parts[1:4])
        elif key == "SPACING":
            info["spacing"] = tuple(float(x) for x in parts[1:4])
        elif key == "ORIGIN":
            info["origin"] = tuple(float(x) for x in parts[1:4])
        elif key == "POINT_DATA":
            info["points"] = int(parts[1])
        elif key in ("SCALARS", "VECTORS"):
            info["arrays"].append((key, parts[1]))
    return info


def read_vtk_arrays(path) -> dict:
    """Read back the arrays written by :func:`export_fields` (x-fastest, flat)."""
    info = read_vtk_header(path)
    n = info["points"]
    with open(path, encoding="utf-8") as fh:
        tokens = fh.read().split()
    out = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok in ("SCALARS", "VECTORS"):
            name = tokens[i + 1]
            ncomp = 3 if tok == "VECTORS" else 1
            j = i + 3
            if tok == "SCALARS":
                j = i + 4
                if tokens[j] == "LOOKUP_TABLE":
                    j += 2
            vals = np.array(tokens[j:j + n * ncomp], dtype=float)
            out[name] = vals.reshape(n, 3) if ncomp == 3 else vals
            i = j + n * ncomp
        else:
            i += 1
    return out
