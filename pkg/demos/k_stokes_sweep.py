"""Sensitivity of the Darcy approximation to the fictitious fluid permeability.

With a porous slab in the way, k barely moves as K_stokes grows. With an open
channel the fluid carries the flow and k grows in proportion to K_stokes, which
shows the approximation should not be used there.
"""
from tightperm import SolverConfig, classify, effective_permeability, solve
from tightperm.grid import Model
from tightperm.synth import BlockedChannel, Channel, generate

cases = {
    "blocked channel": generate(BlockedChannel(width=16, slab_phi=60, slab_thickness=4, n=64)),
    "open channel": generate(Channel(width=16, n=64)),
}

for name, img in cases.items():
    print(f"{name} (category {classify(img, 'z').category.value})")
    for k_stokes in (1e5, 1e6, 1e7, 1e8, 1e9):
        sol = solve(img, Model.DARCY, cfg=SolverConfig(k_stokes=k_stokes))
        print(f"  K_stokes {k_stokes:7.0e} mkDa -> k = {effective_permeability(sol).k_mkda:12.4g} mkDa")
