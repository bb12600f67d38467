"""Dense O(n^3) scans behind the quasi-metric machinery.

Three kernels run over an explicit n-by-n distance matrix: the one-step
(min,max) product that measures the quasi-triangle constant, and two
all-pairs path sweeps (additive and bottleneck). They are the only hot
loops in the package that do not reduce to numpy calls, so they get the
numba treatment; the path sweeps use the classic three-phase blocked
Floyd-Warshall so the working set stays cache-resident, and the blocked
phases parallelize across tiles.
"""

import numpy as np
from numba import njit, prange

from ._parallel import apply_thread_cap

_BLOCK = 128


@njit(cache=True, inline="always")
def _fw_block_add(c, a, b):
    # Dependent in-block sweep: c[i,j] = min(c[i,j], a[i,k] + b[k,j]).
    nk = a.shape[1]
    ni = c.shape[0]
    nj = c.shape[1]
    for k in range(nk):
        for i in range(ni):
            aik = a[i, k]
            for j in range(nj):
                alt = aik + b[k, j]
                if alt < c[i, j]:
                    c[i, j] = alt


@njit(cache=True, inline="always", fastmath=True)
def _gemm_block_add(c, a, b):
    # Independent (min,+) tile product; k innermost over contiguous rows.
    nk = a.shape[1]
    ni = c.shape[0]
    nj = c.shape[1]
    for i in range(ni):
        for k in range(nk):
            aik = a[i, k]
            for j in range(nj):
                c[i, j] = min(c[i, j], aik + b[k, j])


@njit(cache=True, inline="always")
def _fw_block_max(c, a, b):
    nk = a.shape[1]
    ni = c.shape[0]
    nj = c.shape[1]
    for k in range(nk):
        for i in range(ni):
            aik = a[i, k]
            for j in range(nj):
                alt = b[k, j]
                if aik > alt:
                    alt = aik
                if alt < c[i, j]:
                    c[i, j] = alt


@njit(cache=True, inline="always", fastmath=True)
def _gemm_block_max(c, a, b):
    nk = a.shape[1]
    ni = c.shape[0]
    nj = c.shape[1]
    for i in range(ni):
        for k in range(nk):
            aik = a[i, k]
            for j in range(nj):
                c[i, j] = min(c[i, j], max(aik, b[k, j]))


@njit(cache=True, parallel=True)
def _apsp_blocked_add(w, block):
    n = w.shape[0]
    nb = (n + block - 1) // block
    for kb in range(nb):
        k0 = kb * block
        k1 = min(k0 + block, n)
        _fw_block_add(w[k0:k1, k0:k1], w[k0:k1, k0:k1], w[k0:k1, k0:k1])
        for t in prange(nb):
            t0 = t * block
            t1 = min(t0 + block, n)
            if t != kb:
                _fw_block_add(w[k0:k1, t0:t1], w[k0:k1, k0:k1], w[k0:k1, t0:t1])
                _fw_block_add(w[t0:t1, k0:k1], w[t0:t1, k0:k1], w[k0:k1, k0:k1])
        for ib in prange(nb):
            if ib == kb:
                continue
            i0 = ib * block
            i1 = min(i0 + block, n)
            for jb in range(nb):
                if jb == kb:
                    continue
                j0 = jb * block
                j1 = min(j0 + block, n)
                _gemm_block_add(w[i0:i1, j0:j1], w[i0:i1, k0:k1], w[k0:k1, j0:j1])


@njit(cache=True, parallel=True)
def _apsp_blocked_max(w, block):
    n = w.shape[0]
    nb = (n + block - 1) // block
    for kb in range(nb):
        k0 = kb * block
        k1 = min(k0 + block, n)
        _fw_block_max(w[k0:k1, k0:k1], w[k0:k1, k0:k1], w[k0:k1, k0:k1])
        for t in prange(nb):
            t0 = t * block
            t1 = min(t0 + block, n)
            if t != kb:
                _fw_block_max(w[k0:k1, t0:t1], w[k0:k1, k0:k1], w[k0:k1, t0:t1])
                _fw_block_max(w[t0:t1, k0:k1], w[t0:t1, k0:k1], w[k0:k1, k0:k1])
        for ib in prange(nb):
            if ib == kb:
                continue
            i0 = ib * block
            i1 = min(i0 + block, n)
            for jb in range(nb):
                if jb == kb:
                    continue
                j0 = jb * block
                j1 = min(j0 + block, n)
                _gemm_block_max(w[i0:i1, j0:j1], w[i0:i1, k0:k1], w[k0:k1, j0:j1])


@njit(cache=True, parallel=True)
def _minimax_blocked(d, out, block):
    # out[i, j] = min over k of max(d[i, k], d[k, j]), tiled like a GEMM.
    n = d.shape[0]
    nb = (n + block - 1) // block
    for ib in prange(nb):
        i0 = ib * block
        i1 = min(i0 + block, n)
        for jb in range(nb):
            j0 = jb * block
            j1 = min(j0 + block, n)
            for kb in range(nb):
                k0 = kb * block
                k1 = min(k0 + block, n)
                _gemm_block_max(out[i0:i1, j0:j1], d[i0:i1, k0:k1], d[k0:k1, j0:j1])


def minimax_product(dist: np.ndarray) -> np.ndarray:
    """min_k max(d[i,k], d[k,j]) for every pair, as a dense matrix."""
    apply_thread_cap()
    d = np.ascontiguousarray(dist, dtype=np.float64)
    out = np.full_like(d, np.inf)
    _minimax_blocked(d, out, _BLOCK)
    return out


def shortest_paths(weights: np.ndarray) -> np.ndarray:
    """All-pairs additive shortest-path costs of a dense weight matrix."""
    apply_thread_cap()
    w = np.array(weights, dtype=np.float64, copy=True, order="C")
    _apsp_blocked_add(w, _BLOCK)
    return w


def bottleneck_paths(weights: np.ndarray) -> np.ndarray:
    """All-pairs minimax (bottleneck) path costs of a dense weight matrix."""
    apply_thread_cap()
    w = np.array(weights, dtype=np.float64, copy=True, order="C")
    _apsp_blocked_max(w, _BLOCK)
    return w
