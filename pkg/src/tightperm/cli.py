"""Command-line front end: info, classify, generate, solve, sweep, export.

Settings come from a flat ``key=value`` config file (``--config``) with
command-line flags taking precedence. Exit codes: 0 success, 2 configuration
error, 3 forced solve on a non-percolating image, 4 non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import synth
from .classify import preprocess
from .grid import BoundaryCondition, ConfigurationError, Model
from .post import DegenerateInputError, effective_permeability, export_fields
from .solver import (
    DEFAULT_K_STOKES,
    InnerSolverError,
    NonConvergenceError,
    NonPercolatingError,
    SolverConfig,
    auto_workflow,
    solve,
)
from .voxel import (
    DEFAULT_LENGTH,
    DimensionError,
    InvalidPorosityError,
    SidecarError,
    load_raw,
    porosity_stats,
    save_raw,
)

log = logging.getLogger("tightperm")

EXIT_OK, EXIT_CONFIG, EXIT_NONPERCOLATING, EXIT_NONCONVERGENCE = 0, 2, 3, 4
MODELS = ("auto", "stokes", "stokes-brinkman", "brinkman", "darcy")


@dataclass
class RunConfig:
    """Validated run settings; every field has a default."""

    input: str | None = None
    dims: tuple | None = None
    L: float | None = None
    direction: str = "z"
    model: str = "auto"
    bc: str = "pressure-drop"
    dp: float = 1.0
    rtol: float = 1e-8
    k_stokes: float | None = None
    output: str | None = None
    export_fields: str | None = None
    export_matrices: str | None = None
    threads: int | None = None
    deterministic: bool = False
    cross_check: bool = False
    maxit_outer: int = 1000

    def validate(self) -> "RunConfig":
        if self.direction not in ("x", "y", "z"):
            raise ConfigurationError(f"direction must be x, y or z, got {self.direction!r}")
        if self.model not in MODELS:
            raise ConfigurationError(f"model must be one of {', '.join(MODELS)}, got {self.model!r}")
        BoundaryCondition.parse(self.bc)
        if not 0 < self.rtol < 1:
            raise ConfigurationError(f"rtol must lie in (0, 1), got {self.rtol}")
        if self.k_stokes is not None and not self.k_stokes > 0:
            raise ConfigurationError(f"K_stokes must be positive, got {self.k_stokes}")
        if self.L is not None and not self.L > 0:
            raise ConfigurationError(f"L must be positive, got {self.L}")
        if self.dims is not None and (len(self.dims) != 3 or min(self.dims) < 1):
            raise ConfigurationError(f"dims must be three positive integers, got {self.dims}")
        if self.threads is not None and self.threads < 1:
            raise ConfigurationError(f"threads must be positive, got {self.threads}")
        return self

    def solver_config(self) -> SolverConfig:
        k = self.k_stokes
        if k is None and self.model == "auto":
            k = DEFAULT_K_STOKES
        return SolverConfig(
            rtol=self.rtol, k_stokes=k, deterministic=self.deterministic, maxit_outer=self.maxit_outer
        )

    @property
    def pressure_drop(self) -> tuple[float, float]:
        return (float(self.dp), 0.0)


_CASTS = {
    "dims": lambda s: tuple(int(v) for v in s.replace(",", " ").split()),
    "L": float,
    "dp": float,
    "rtol": float,
    "k_stokes": float,
    "threads": int,
    "maxit_outer": int,
    "deterministic": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
    "cross_check": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
}


def read_config(path) -> dict:
    """Flat ``key=value`` file; ``#`` starts a comment."""
    known = {f.name for f in fields(RunConfig)}
    out = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _CASTS.get(key, str)(value)
        except ValueError as exc:
            raise ConfigurationError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return out


def build_run_config(args) -> RunConfig:
    values = read_config(args.config) if getattr(args, "config", None) else {}
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None and v is not False:
            values[f.name] = tuple(v) if f.name == "dims" else v
    return RunConfig(**values).validate()


def _load(cfg: RunConfig):
    if not cfg.input:
        raise ConfigurationError("no input image given")
    return load_raw(cfg.input, cfg.dims, cfg.L)


def _set_threads(n):
    if n is None:
        return
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _emit(record: dict, path=None, stream=None) -> None:
    text = json.dumps(record, sort_keys=True) + "\n"
    (stream or sys.stdout).write(text)
    if path:
        Path(path).write_text(text, encoding="utf-8")


# -- commands -----------------------------------------------------------------

def cmd_info(cfg: RunConfig, directions=("x", "y", "z"), stream=None) -> int:
    stream = stream or sys.stdout
    img = _load(cfg)
    stats = porosity_stats(img)
    nx, ny, nz = img.dims
    print(f"image: {cfg.input}", file=stream)
    print(f"dims: {nx} x {ny} x {nz}, L = {img.scale.L:g} m", file=stream)
    print(
        f"porosity: total {100 * stats.total:.2f} %, resolved {100 * stats.resolved:.2f} %, "
        f"unresolved {100 * stats.unresolved:.2f} %",
        file=stream,
    )
    for d in directions:
        _, rep = preprocess(img, d)
        yes = {True: "Yes", False: "No"}
        print(
            f"{d}: Stokes: {yes[rep.stokes_connected]}, "
            f"Stokes-Brinkman: {yes[rep.brinkman_connected]}, category {rep.category.value}",
            file=stream,
        )
    return EXIT_OK


def cmd_classify(cfg: RunConfig, clean_out=None, stream=None) -> int:
    img = _load(cfg)
    cleaned, rep = preprocess(img, cfg.direction)
    if clean_out:
        save_raw(cleaned, clean_out, sidecar=True)
    _emit(
        {
            "category": rep.category.value,
            "direction": rep.direction,
            "removed_voxels": rep.removed_voxels,
            "component_count": rep.component_count,
            "stokes_connected": rep.stokes_connected,
            "brinkman_connected": rep.brinkman_connected,
        },
        cfg.output,
        stream,
    )
    return EXIT_OK


def _geometry(args):
    n, L = args.n, args.L or DEFAULT_LENGTH
    if args.kind == "sphere":
        return synth.SphereArray(args.diameter, n, L)
    if args.kind == "channel":
        return synth.Channel(args.width, n, args.matrix_phi, args.axis, L)
    if args.kind == "blocked-channel":
        return synth.BlockedChannel(
            args.width, args.slab_phi, args.slab_thickness, n, args.matrix_phi, args.axis, L
        )
    if args.kind == "layered":
        layers = [tuple(int(v) for v in item.split(":")) for item in args.layers]
        return synth.Layered(args.axis, layers, n, L)
    return synth.Homogeneous(args.phi, n, L)


def cmd_generate(args) -> int:
    img = synth.generate(_geometry(args))
    save_raw(img, args.out, sidecar=True)
    print(f"wrote {args.out} ({' x '.join(map(str, img.dims))})")
    return EXIT_OK


def _run(cfg: RunConfig, img=None):
    """Solve per config; returns (solution or None, PermeabilityResult, image)."""
    img = img if img is not None else _load(cfg)
    scfg = cfg.solver_config()
    if cfg.model == "auto":
        sol, res, _ = auto_workflow(
            img, cfg.bc, scfg, direction=cfg.direction,
            pressure_drop=cfg.pressure_drop, cross_check=cfg.cross_check,
        )
        return sol, res, img
    cleaned, rep = preprocess(img, cfg.direction)
    sol = solve(
        cleaned if BoundaryCondition.parse(cfg.bc) is BoundaryCondition.PRESSURE_DROP else img,
        Model.parse(cfg.model), cfg.bc, scfg,
        pressure_drop=cfg.pressure_drop, direction=cfg.direction,
    )
    return sol, effective_permeability(sol, category=rep.category), img


def _export_matrices(sol, directory) -> None:
    from scipy.io import mmwrite

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    mmwrite(d / "A.mtx", sol.ops.A)
    mmwrite(d / "B.mtx", sol.ops.B)
    np.savetxt(d / "f.txt", sol.ops.f)


def cmd_solve(cfg: RunConfig, stream=None) -> int:
    sol, res, img = _run(cfg)
    if sol is not None and cfg.export_fields:
        export_fields(sol, img, cfg.export_fields)
    if sol is not None and cfg.export_matrices:
        _export_matrices(sol, cfg.export_matrices)
    _emit(res.to_record(), cfg.output, stream)
    return EXIT_OK


def cmd_export(cfg: RunConfig, path, stream=None) -> int:
    sol, res, img = _run(cfg)
    if sol is None:
        raise NonPercolatingError("nothing to export: the image does not percolate")
    export_fields(sol, img, path)
    _emit(res.to_record(), cfg.output, stream)
    return EXIT_OK


SWEEP_PARAMS = {"rtol": "rtol", "rtol_s": "rtol", "k_stokes": "k_stokes"}
SWEEP_COLUMNS = ("value", "k_mkDa", "iterations", "wall_time_s", "status")


def cmd_sweep(cfg: RunConfig, parameter: str, values, stream=None) -> int:
    """One solve per value; failures become rows instead of aborting the sweep."""
    key = SWEEP_PARAMS.get(parameter.lower())
    if key is None:
        raise ConfigurationError(f"cannot sweep {parameter!r}; choose rtol or k_stokes")
    writer = csv.writer(stream or sys.stdout, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    if not values:
        return EXIT_OK
    img = _load(cfg)
    for v in values:
        try:
            _, res, _ = _run(replace(cfg, **{key: float(v)}).validate(), img)
            writer.writerow([v, f"{res.k_mkda:.9g}", res.iterations_outer, f"{res.wall_time_s:.3f}", "ok"])
        except (NonConvergenceError, InnerSolverError, NonPercolatingError, ConfigurationError) as exc:
            writer.writerow([v, "", "", "", f"error: {exc}"])
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------

def _add_run_options(p, solve_opts=True):
    p.add_argument("input", nargs="?", help="8-bit raw porosity image")
    p.add_argument("--config", help="flat key=value settings file")
    p.add_argument("--dims", type=int, nargs=3, metavar=("NX", "NY", "NZ"))
    p.add_argument("--L", type=float, help="sample length in meters")
    p.add_argument("--direction", choices=("x", "y", "z"))
    p.add_argument("--output", "-o", help="also write the JSON record here")
    if not solve_opts:
        return
    p.add_argument("--model", choices=MODELS)
    p.add_argument("--bc", choices=("pressure-drop", "periodic"))
    p.add_argument("--dp", type=float, help="inlet pressure with zero outlet pressure (default 1)")
    p.add_argument("--rtol", type=float, help="outer relative tolerance (default 1e-8)")
    p.add_argument("--k-stokes", dest="k_stokes", type=float, help="fictitious fluid permeability, mkDa")
    p.add_argument("--threads", type=int)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--cross-check", dest="cross_check", action="store_true",
                   help="also solve Stokes-Brinkman when the Darcy approximation is chosen")
    p.add_argument("--maxit-outer", dest="maxit_outer", type=int)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tightperm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("info", help="dimensions, porosity and connectivity per direction")
    _add_run_options(p, solve_opts=False)

    p = sub.add_parser("classify", help="connectivity category as JSON")
    _add_run_options(p, solve_opts=False)
    p.add_argument("--clean", help="write the image with isolated regions removed")

    p = sub.add_parser("generate", help="write a synthetic geometry")
    p.add_argument("kind", choices=("sphere", "channel", "blocked-channel", "layered", "homogeneous"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--L", type=float)
    p.add_argument("--diameter", type=float, default=0.6)
    p.add_argument("--width", type=int, default=8)
    p.add_argument("--matrix-phi", dest="matrix_phi", type=int, default=100)
    p.add_argument("--slab-phi", dest="slab_phi", type=int, default=60)
    p.add_argument("--slab-thickness", dest="slab_thickness", type=int, default=4)
    p.add_argument("--axis", default="z", choices=("x", "y", "z"))
    p.add_argument("--layers", nargs="+", default=[], help="THICKNESS:PHI items")
    p.add_argument("--phi", type=int, default=60)

    p = sub.add_parser("solve", help="compute the effective permeability")
    _add_run_options(p)
    p.add_argument("--export-fields", dest="export_fields", help="legacy VTK output path")
    p.add_argument("--export-matrices", dest="export_matrices", help="directory for A, B, f")

    p = sub.add_parser("sweep", help="repeat a solve over rtol or K_stokes values (CSV)")
    _add_run_options(p)
    p.add_argument("--param", required=True)
    p.add_argument("--values", nargs="*", type=float, default=[])

    p = sub.add_parser("export", help="solve and write fields as legacy VTK")
    _add_run_options(p)
    p.add_argument("--vtk", required=True)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "generate":
            return cmd_generate(args)
        cfg = build_run_config(args)
        _set_threads(cfg.threads)
        if args.command == "info":
            dirs = (cfg.direction,) if args.direction else ("x", "y", "z")
            return cmd_info(cfg, dirs)
        if args.command == "classify":
            return cmd_classify(cfg, args.clean)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.param, args.values)
        return cmd_export(cfg, args.vtk)
    except (ConfigurationError, synth.SpecError, DimensionError, InvalidPorosityError,
            SidecarError, DegenerateInputError, FileNotFoundError) as exc:
        print(f"tightperm: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonPercolatingError as exc:
        print(f"tightperm: {exc}", file=sys.stderr)
        return EXIT_NONPERCOLATING
    except (NonConvergenceError, InnerSolverError) as exc:
        print(f"tightperm: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
