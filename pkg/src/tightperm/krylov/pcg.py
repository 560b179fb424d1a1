"""Preconditioned conjugate gradients with unpreconditioned-norm stopping."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K


class IndefiniteError(ArithmeticError):
    """Non-positive curvature <p, A p> met during CG."""

    def __init__(self, iteration: int, curvature: float):
        super().__init__(f"non-positive curvature {curvature:.3e} at iteration {iteration}")
        self.iteration = iteration
        self.curvature = curvature


@dataclass
class SolveStats:
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True
    wall_time: float = 0.0
    history: list = field(default_factory=list)
    true_residual: float | None = None
    restarts: int = 0

    def merge(self, other: "SolveStats") -> None:
        """Accumulate an inner solve into a running total."""
        self.iterations += other.iterations
        self.wall_time += other.wall_time
        self.converged = self.converged and other.converged
        self.residual = max(self.residual, other.residual)


def as_operator(A):
    if A is None:
        return lambda v: v.copy()
    if callable(A) and not hasattr(A, "dot"):
        return A
    return lambda v: A @ v


def make_dot(deterministic: bool):
    if deterministic:
        return K.serial_dot
    return np.dot


def pcg(
    apply,
    b,
    rtol: float = 1e-8,
    maxit: int = 1000,
    precond=None,
    x0=None,
    *,
    flexible: bool = False,
    check_every: int | None = None,
    drift_factor: float = 10.0,
    verify: bool = False,
    deterministic: bool = False,
    project=None,
):
    """Solve ``A x = b`` for symmetric positive (semi)definite ``A``.

    Stops when ``||b - A x|| / ||b|| <= rtol`` using the recurrence residual.
    ``flexible`` switches beta to the Polak-Ribiere form, which tolerates a
    preconditioner that changes between iterations (inexact inner solves).
    ``check_every`` recomputes the true residual periodically and restarts if
    it exceeds the recurrence residual by ``drift_factor``. ``project`` is
    applied to preconditioned vectors (e.g. to remove a null-space component).
    Returns ``(x, SolveStats)``; non-convergence is reported through
    ``stats.converged`` rather than an exception.
    """
    t0 = time.perf_counter()
    A = as_operator(apply)
    M = as_operator(precond)
    dot = make_dot(deterministic)
    b = np.asarray(b, dtype=float)
    stats = SolveStats(converged=False)

    bnorm = np.sqrt(dot(b, b))
    if bnorm == 0.0:
        stats.converged = True
        stats.true_residual = 0.0
        stats.wall_time = time.perf_counter() - t0
        return np.zeros_like(b), stats

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - A(x) if x0 is not None else b.copy()

    def precondition(res):
        z = M(res)
        return project(z) if project is not None else z

    res = np.sqrt(dot(r, r)) / bnorm
    stats.history.append(res)
    if res <= rtol:
        stats.converged = True
    else:
        z = precondition(r)
        p = z.copy()
        rz = dot(r, z)
        k = 0
        while k < maxit:
            k += 1
            q = A(p)
            pq = dot(p, q)
            if not pq > 0.0:
                raise IndefiniteError(k, pq)
            alpha = rz / pq
            x += alpha * p
            if flexible:
                r_old = r.copy()
            r -= alpha * q
            res = np.sqrt(dot(r, r)) / bnorm
            stats.history.append(res)

            restart = False
            if res <= rtol or (check_every and k % check_every == 0):
                r_true = b - A(x)
                true_res = np.sqrt(dot(r_true, r_true)) / bnorm
                if true_res > drift_factor * max(res, rtol):
                    r = r_true
                    res = true_res
                    restart = True
                    stats.restarts += 1
                elif res <= rtol:
                    stats.converged = True
                    stats.true_residual = true_res
                    break
            if restart:
                z = precondition(r)
                p = z.copy()
                rz = dot(r, z)
                continue

            z = precondition(r)
            if flexible:
                beta = dot(z, r - r_old) / rz
                rz = dot(r, z)
            else:
                rz_new = dot(r, z)
                beta = rz_new / rz
                rz = rz_new
            p = z + beta * p
        stats.iterations = k

    stats.residual = float(res)
    if verify and stats.true_residual is None:
        r_true = b - A(x)
        stats.true_residual = float(np.sqrt(dot(r_true, r_true)) / bnorm)
    stats.wall_time = time.perf_counter() - t0
    return x, stats
