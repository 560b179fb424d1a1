"""CSR helpers on top of ``scipy.sparse``."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def as_csr(A) -> sp.csr_matrix:
    """Canonical float64 CSR with int64 indices, summed duplicates, sorted columns."""
    A = sp.csr_matrix(A, dtype=np.float64)
    A.sum_duplicates()
    A.sort_indices()
    A.indptr = A.indptr.astype(np.int64, copy=False)
    A.indices = A.indices.astype(np.int64, copy=False)
    return A


def symmetry_defect(A, probes: int = 8, seed: int = 0) -> float:
    """max |<Av,w> - <v,Aw>| / (|A v| |w|) over random probe pairs."""
    rng = np.random.default_rng(seed)
    n = A.shape[0]
    worst = 0.0
    for _ in range(probes):
        v = rng.standard_normal(n)
        w = rng.standard_normal(n)
        Av, Aw = A @ v, A @ w
        scale = max(np.linalg.norm(Av) * np.linalg.norm(w), np.linalg.norm(Aw) * np.linalg.norm(v), 1e-300)
        worst = max(worst, abs(Av @ w - v @ Aw) / scale)
    return worst


def is_symmetric(A, tol: float = 1e-13, probes: int = 8) -> bool:
    return symmetry_defect(A, probes) <= tol
