"""Classical (Ruge-Stueben) algebraic multigrid used as a PCG preconditioner.

Setup: strength of connection with threshold ``theta``, first-pass RS C/F
splitting, direct interpolation, Galerkin coarse operators ``R A P`` with
``R = P^T``. One V-cycle uses a forward Gauss-Seidel sweep before the coarse
correction and a backward sweep after it, so the cycle is a fixed symmetric
linear operator.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import _kernels as K
from .csr import as_csr

DENSE_COARSE_LIMIT = 4000


@dataclass
class Level:
    A: sp.csr_matrix
    diag: np.ndarray
    P: sp.csr_matrix | None = None
    R: sp.csr_matrix | None = None
    splitting: np.ndarray | None = None


@dataclass
class AmgHierarchy:
    levels: list[Level]
    coarse_inverse: np.ndarray | None = None
    theta: float = 0.25
    info: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.levels[0].A.shape[0]

    @property
    def shape(self):
        return (self.n, self.n)

    def level_sizes(self) -> list[int]:
        return [lvl.A.shape[0] for lvl in self.levels]

    def operator_complexity(self) -> float:
        return sum(lvl.A.nnz for lvl in self.levels) / self.levels[0].A.nnz

    def grid_complexity(self) -> float:
        return sum(self.level_sizes()) / self.n

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return amg_apply(self, r)

    def __repr__(self):
        sizes = " -> ".join(str(s) for s in self.level_sizes())
        return f"AmgHierarchy({sizes}, op. complexity {self.operator_complexity():.2f})"


def strength(A: sp.csr_matrix, theta: float) -> np.ndarray:
    """Boolean mask over the stored entries of ``A`` marking strong couplings."""
    return K.strength_mask(A.indptr, A.indices, A.data, float(theta))


def cf_splitting(A: sp.csr_matrix, theta: float = 0.25) -> tuple[np.ndarray, np.ndarray]:
    """Return (state, strong_mask); state is 2 for C points and 1 for F points."""
    A = as_csr(A)
    strong = strength(A, theta)
    n = A.shape[0]
    rows = np.repeat(np.arange(n), np.diff(A.indptr))
    S = sp.csr_matrix(
        (np.ones(int(strong.sum()), dtype=np.int8), (rows[strong], A.indices[strong])),
        shape=A.shape,
    )
    S.sort_indices()
    T = S.T.tocsr()
    T.sort_indices()
    state = K.rs_first_pass(
        S.indptr.astype(np.int64), S.indices.astype(np.int64),
        T.indptr.astype(np.int64), T.indices.astype(np.int64),
    )
    return state, strong


def interpolation(A: sp.csr_matrix, state: np.ndarray, strong: np.ndarray) -> sp.csr_matrix:
    ptr, idx, val, nc = K.direct_interpolation(A.indptr, A.indices, A.data, strong, state)
    P = sp.csr_matrix((val, idx, ptr), shape=(A.shape[0], int(nc)))
    P.sort_indices()
    return P


def _coarse_inverse(A: sp.csr_matrix) -> np.ndarray:
    dense = A.toarray()
    n = dense.shape[0]
    try:
        c, low = sla.cho_factor(dense)
        # a singular matrix can factor with a roundoff-sized last pivot
        pivots = np.diag(c) ** 2
        if pivots.min() > 1e3 * n * np.finfo(float).eps * np.abs(np.diag(dense)).max():
            return sla.cho_solve((c, low), np.eye(n))
    except np.linalg.LinAlgError:
        pass
    # semidefinite (periodic problems): symmetric pseudo-inverse
    return sla.pinvh(dense)


def amg_setup(matrix, theta: float = 0.25, max_levels: int = 25, coarse_size: int = 64) -> AmgHierarchy:
    """Build a classical AMG hierarchy for a symmetric matrix with non-negative diagonal."""
    A = as_csr(matrix)
    if A.shape[0] == 0:
        raise ValueError("cannot build an AMG hierarchy for an empty matrix")
    levels = [Level(A, A.diagonal().copy())]
    while len(levels) < max_levels and A.shape[0] > coarse_size:
        state, strong = cf_splitting(A, theta)
        nc = int((state == K.C_PT).sum())
        if nc == 0 or nc == A.shape[0]:
            break
        P = interpolation(A, state, strong)
        R = P.T.tocsr()
        Ac = as_csr(R @ A @ P)
        levels[-1].P, levels[-1].R, levels[-1].splitting = P, R, state
        A = Ac
        levels.append(Level(A, A.diagonal().copy()))
    coarse = None
    if A.shape[0] <= max(coarse_size, 1) or (len(levels) > 1 and A.shape[0] <= DENSE_COARSE_LIMIT):
        coarse = _coarse_inverse(A)
    return AmgHierarchy(levels, coarse, theta)


def _cycle(h: AmgHierarchy, k: int, b: np.ndarray) -> np.ndarray:
    lvl = h.levels[k]
    A = lvl.A
    if k == len(h.levels) - 1:
        if h.coarse_inverse is not None:
            return h.coarse_inverse @ b
        x = np.zeros_like(b)
        K.gauss_seidel_forward(A.indptr, A.indices, A.data, lvl.diag, x, b)
        K.gauss_seidel_backward(A.indptr, A.indices, A.data, lvl.diag, x, b)
        return x
    x = np.zeros_like(b)
    K.gauss_seidel_forward(A.indptr, A.indices, A.data, lvl.diag, x, b)
    r = b - A @ x
    x += lvl.P @ _cycle(h, k + 1, lvl.R @ r)
    K.gauss_seidel_backward(A.indptr, A.indices, A.data, lvl.diag, x, b)
    return x


def amg_apply(h: AmgHierarchy, r: np.ndarray) -> np.ndarray:
    """One V-cycle from a zero initial guess: z = M^{-1} r."""
    r = np.asarray(r, dtype=float)
    if r.shape != (h.n,):
        raise ValueError(f"residual has shape {r.shape}, hierarchy expects ({h.n},)")
    return _cycle(h, 0, r)
