"""A channel blocked by a porous slab: Darcy approximation vs Stokes-Brinkman.

The fluid path is interrupted by microporosity, so the image is connected only
through porous voxels. In that case the resolved fluid contributes little and
the much cheaper Darcy solve gives nearly the same permeability.
"""
import time

from tightperm import SolverConfig, classify, effective_permeability, solve
from tightperm.grid import Model
from tightperm.synth import BlockedChannel, generate

img = generate(BlockedChannel(width=16, slab_phi=60, slab_thickness=4, n=64))
print("category:", classify(img, "z").category.value)

# first call compiles the numba kernels
solve(img, Model.DARCY)

for model in (Model.DARCY, Model.STOKES_BRINKMAN):
    t0 = time.perf_counter()
    sol = solve(img, model, cfg=SolverConfig(rtol=1e-8))
    wall = time.perf_counter() - t0
    res = effective_permeability(sol)
    print(f"{model.value:>16}: k = {res.k_mkda:8.2f} mkDa, "
          f"outer {sol.outer.iterations:3d}, {wall:6.2f} s")
