"""Jitted inner kernels of the trajectory engine.

These fuse the per-step overlap sweep and the damping update into two
native calls; the surrounding orchestration (FFTs, sampling, bookkeeping)
stays in plain numpy.  Both kernels are pure functions of their inputs, so
trajectory reproducibility is unaffected.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def overlap_kernel(f, bperm, row_b0, row_b1, mass_factor, prune, env_c, idxk, b2t, a2, block_size):
    """Detector overlaps on active momentum rows, plus Σ|c|².

    Returns (active row indices, c block (n_active, n_x), sum of |c|²).
    A row is active when the coarse-block spectral mass under its window
    can possibly produce an overlap above the pruning floor.
    """
    nb = bperm.shape[0]
    blocks = np.empty(nb)
    for b in range(nb):
        s = bperm[b] * block_size
        acc = 0.0
        for i in range(s, s + block_size):
            v = f[i]
            acc += v.real * v.real + v.imag * v.imag
        blocks[b] = acc
    bc = np.empty(nb + 1)
    bc[0] = 0.0
    for b in range(nb):
        bc[b + 1] = bc[b] + blocks[b]

    n_p = row_b0.shape[0]
    active = np.empty(n_p, dtype=np.int64)
    na = 0
    for r in range(n_p):
        if (bc[row_b1[r]] - bc[row_b0[r]]) * mass_factor >= prune:
            active[na] = r
            na += 1
    active = active[:na]

    wk = idxk.shape[1]
    p2 = np.empty((na, wk), dtype=np.complex128)
    for i in range(na):
        r = active[i]
        for w in range(wk):
            p2[i, w] = env_c[r, w] * f[idxk[r, w]]
    cb = np.dot(p2, b2t)

    total = 0.0
    n_x = cb.shape[1]
    for i in range(na):
        r = active[i]
        for j in range(n_x):
            v = cb[i, j] * a2[r, j]
            cb[i, j] = v
            total += v.real * v.real + v.imag * v.imag
    return active, cb, total


@njit(cache=True)
def damping_kernel(f, active, cb, a2, env_u, b2_conj, s0, wk, half_damp, half_n):
    """Subtract (γδt/2)·ũ from the raw-FFT state in place.

    The touched band is contiguous in sorted momentum order; indices are
    mapped to fft order on the fly (split at the zero frequency).
    """
    na = active.shape[0]
    n_x = cb.shape[1]
    d2 = np.empty_like(cb)
    for i in range(na):
        r = active[i]
        for j in range(n_x):
            d2[i, j] = cb[i, j] * np.conj(a2[r, j])
    rows = np.dot(d2, b2_conj)

    lo = s0[active[0]]
    hi = s0[active[na - 1]] + wk
    acc = np.zeros(hi - lo, dtype=np.complex128)
    for i in range(na):
        off = s0[active[i]] - lo
        for w in range(wk):
            acc[off + w] += env_u[active[i], w] * rows[i, w]
    for s in range(lo, hi):
        i = s - half_n if s >= half_n else s + half_n
        f[i] -= half_damp * acc[s - lo]
