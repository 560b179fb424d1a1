"""Sparse linear algebra: CSR helpers, PCG and classical AMG."""
from .amg import AmgHierarchy, amg_apply, amg_setup, cf_splitting
from .csr import as_csr, is_symmetric, symmetry_defect
from .pcg import IndefiniteError, SolveStats, pcg

__all__ = [
    "AmgHierarchy",
    "IndefiniteError",
    "SolveStats",
    "amg_apply",
    "amg_setup",
    "as_csr",
    "cf_splitting",
    "is_symmetric",
    "pcg",
    "symmetry_defect",
]
