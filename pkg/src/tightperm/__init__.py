"""Permeability of voxelized porous media via Stokes, Stokes-Brinkman and Darcy solvers."""
from .classify import Category, ConnectivityReport, classify, label_components, percolates, preprocess, remove_isolated
from .grid import BoundaryCondition, ConfigurationError, Model, OperatorSet, build_operators
from .post import PermeabilityResult, darcy_velocity, divergence_norm, effective_permeability, export_fields
from .solver import FlowSolution, NonConvergenceError, NonPercolatingError, SolverConfig, auto_workflow, solve
from .synth import BlockedChannel, Channel, Homogeneous, Layered, SphereArray, generate, table1_suite
from .voxel import (
    PhysicalScale,
    VoxelImage,
    correlation_permeability,
    load_raw,
    porosity_stats,
    save_raw,
    segment_ternary,
)

__version__ = "0.1.0"
