"""Periodic Stokes flow past a cubic array of spheres.

Solves the unit-cell problem for a few sphere diameters and compares the
dimensionless permeability with the tabulated reference values.
"""
import time

from tightperm import SolverConfig, effective_permeability, solve
from tightperm.grid import BoundaryCondition, Model
from tightperm.synth import TABLE1, SphereArray, generate

N = 40
cfg = SolverConfig(rtol=1e-3)

print(f"{'D':>5} {'k_hat':>10} {'reference':>10} {'error %':>8} {'outer':>6} {'time s':>7}")
for D in (0.2, 0.6, 1.0):
    img = generate(SphereArray(D, N))
    t0 = time.perf_counter()
    sol = solve(img, Model.STOKES, BoundaryCondition.PERIODIC, cfg)
    wall = time.perf_counter() - t0
    k = effective_permeability(sol).k_hat
    ref = TABLE1[(D, N)]
    print(f"{D:5.1f} {k:10.4g} {ref:10.3g} {100 * abs(k - ref) / ref:8.2f} "
          f"{sol.outer.iterations:6d} {wall:7.1f}")
