"""Compiled inner loops for the AMG setup and smoothing."""
import numba
import numpy as np

U_PT, F_PT, C_PT = 0, 1, 2


@numba.njit(cache=True)
def serial_dot(a, b):
    s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


@numba.njit(cache=True)
def csr_matvec(indptr, indices, data, x, out):
    for i in range(out.shape[0]):
        s = 0.0
        for e in range(indptr[i], indptr[i + 1]):
            s += data[e] * x[indices[e]]
        out[i] = s


@numba.njit(cache=True, parallel=True)
def csr_matvec_parallel(indptr, indices, data, x, out):
    # row-parallel: each row's sum is still accumulated in a fixed order
    for i in numba.prange(out.shape[0]):
        s = 0.0
        for e in range(indptr[i], indptr[i + 1]):
            s += data[e] * x[indices[e]]
        out[i] = s


@numba.njit(cache=True)
def strength_mask(indptr, indices, data, theta):
    """Classical strength: -a_ij >= theta * max_k(-a_ik) over off-diagonals."""
    n = indptr.shape[0] - 1
    strong = np.zeros(data.shape[0], dtype=np.bool_)
    for i in range(n):
        m = 0.0
        for e in range(indptr[i], indptr[i + 1]):
            if indices[e] != i and -data[e] > m:
                m = -data[e]
        if m <= 0.0:
            continue
        cut = theta * m
        for e in range(indptr[i], indptr[i + 1]):
            if indices[e] != i and -data[e] >= cut:
                strong[e] = True
    return strong


@numba.njit(cache=True)
def _bucket_remove(i, lam, head, nxt, prv):
    b = lam[i]
    if prv[i] >= 0:
        nxt[prv[i]] = nxt[i]
    else:
        head[b] = nxt[i]
    if nxt[i] >= 0:
        prv[nxt[i]] = prv[i]
    nxt[i] = -1
    prv[i] = -1


@numba.njit(cache=True)
def _bucket_insert(i, lam, head, nxt, prv):
    b = lam[i]
    nxt[i] = head[b]
    prv[i] = -1
    if head[b] >= 0:
        prv[head[b]] = i
    head[b] = i


@numba.njit(cache=True)
def rs_first_pass(s_ptr, s_idx, t_ptr, t_idx):
    """Ruge-Stueben first-pass C/F splitting.

    ``s`` rows list the points i strongly depends on, ``t`` = transpose of s
    lists the points that strongly depend on i. Ties in the measure go to the
    lowest index.
    """
    n = s_ptr.shape[0] - 1
    state = np.zeros(n, dtype=np.int8)
    lam = np.empty(n, dtype=np.int64)
    for i in range(n):
        lam[i] = t_ptr[i + 1] - t_ptr[i]
    cap = 2 * (lam.max() if n else 0) + 2
    head = np.full(cap, -1, dtype=np.int64)
    nxt = np.full(n, -1, dtype=np.int64)
    prv = np.full(n, -1, dtype=np.int64)
    for i in range(n - 1, -1, -1):
        _bucket_insert(i, lam, head, nxt, prv)
    top = cap - 1
    while True:
        while top >= 0 and head[top] < 0:
            top -= 1
        if top < 0:
            break
        i = head[top]
        _bucket_remove(i, lam, head, nxt, prv)
        if lam[i] == 0 and s_ptr[i + 1] == s_ptr[i]:
            # no strong couplings at all: nothing to interpolate from or to
            state[i] = F_PT
            continue
        state[i] = C_PT
        for e in range(t_ptr[i], t_ptr[i + 1]):
            j = t_idx[e]
            if state[j] != U_PT:
                continue
            state[j] = F_PT
            _bucket_remove(j, lam, head, nxt, prv)
            for f in range(s_ptr[j], s_ptr[j + 1]):
                k = s_idx[f]
                if state[k] != U_PT:
                    continue
                _bucket_remove(k, lam, head, nxt, prv)
                lam[k] += 1
                _bucket_insert(k, lam, head, nxt, prv)
                if lam[k] > top:
                    top = lam[k]
        for e in range(s_ptr[i], s_ptr[i + 1]):
            j = s_idx[e]
            if state[j] != U_PT or lam[j] == 0:
                continue
            _bucket_remove(j, lam, head, nxt, prv)
            lam[j] -= 1
            _bucket_insert(j, lam, head, nxt, prv)
    return state


@numba.njit(cache=True)
def direct_interpolation(indptr, indices, data, strong, state):
    """Classical direct interpolation; returns CSR arrays of P (n x nc)."""
    n = indptr.shape[0] - 1
    cmap = np.full(n, -1, dtype=np.int64)
    nc = 0
    for i in range(n):
        if state[i] == C_PT:
            cmap[i] = nc
            nc += 1
    p_ptr = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        if state[i] == C_PT:
            p_ptr[i + 1] = p_ptr[i] + 1
        else:
            cnt = 0
            for e in range(indptr[i], indptr[i + 1]):
                j = indices[e]
                if strong[e] and state[j] == C_PT:
                    cnt += 1
            p_ptr[i + 1] = p_ptr[i] + cnt
    p_idx = np.empty(p_ptr[n], dtype=np.int64)
    p_val = np.empty(p_ptr[n], dtype=np.float64)
    for i in range(n):
        pos = p_ptr[i]
        if state[i] == C_PT:
            p_idx[pos] = cmap[i]
            p_val[pos] = 1.0
            continue
        diag = 0.0
        neg_all = 0.0
        pos_all = 0.0
        neg_c = 0.0
        pos_c = 0.0
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            a = data[e]
            if j == i:
                diag += a
                continue
            if a < 0.0:
                neg_all += a
            else:
                pos_all += a
            if strong[e] and state[j] == C_PT:
                if a < 0.0:
                    neg_c += a
                else:
                    pos_c += a
        alpha = neg_all / neg_c if neg_c != 0.0 else 0.0
        if pos_c != 0.0:
            beta = pos_all / pos_c
        else:
            beta = 0.0
            diag += pos_all
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            if j == i or not strong[e] or state[j] != C_PT:
                continue
            a = data[e]
            w = alpha if a < 0.0 else beta
            p_idx[pos] = cmap[j]
            p_val[pos] = -w * a / diag
            pos += 1
    return p_ptr, p_idx, p_val, nc


@numba.njit(cache=True)
def gauss_seidel_forward(indptr, indices, data, diag, x, b):
    n = b.shape[0]
    for i in range(n):
        d = diag[i]
        if d == 0.0:
            continue
        s = b[i]
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            if j != i:
                s -= data[e] * x[j]
        x[i] = s / d


@numba.njit(cache=True)
def gauss_seidel_backward(indptr, indices, data, diag, x, b):
    n = b.shape[0]
    for i in range(n - 1, -1, -1):
        d = diag[i]
        if d == 0.0:
            continue
        s = b[i]
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            if j != i:
                s -= data[e] * x[j]
        x[i] = s / d
