"""Fused numba kernels for the weighted-gradient operator and its adjoint.

These implement exactly the same algebra as the composed numpy path in
tdvid.ops (half-step difference -> restriction to cells -> 2x2 plane
blocks), fused into single loops over cells. Loops are serial so outputs
are run-to-run identical; the adjoint scatter needs no atomics.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def apply_k(u, mats):
    M, N, T = u.shape
    out = np.empty((M - 1, N - 1, T - 1, 6))
    for i in range(M - 1):
        for j in range(N - 1):
            for k in range(T - 1):
                d1 = u[i + 1, j, k] - u[i, j, k]
                d2 = u[i, j + 1, k] - u[i, j, k]
                d3 = u[i, j, k + 1] - u[i, j, k]
                m = mats[i, j, k]
                out[i, j, k, 0] = m[0, 0, 0] * d1 + m[0, 0, 1] * d2
                out[i, j, k, 1] = m[0, 1, 0] * d1 + m[0, 1, 1] * d2
                out[i, j, k, 2] = m[1, 0, 0] * d1 + m[1, 0, 1] * d3
                out[i, j, k, 3] = m[1, 1, 0] * d1 + m[1, 1, 1] * d3
                out[i, j, k, 4] = m[2, 0, 0] * d2 + m[2, 0, 1] * d3
                out[i, j, k, 5] = m[2, 1, 0] * d2 + m[2, 1, 1] * d3
    return out


@njit(cache=True)
def apply_k_adjoint(y, mats):
    mc, nc, tc = y.shape[0], y.shape[1], y.shape[2]
    out = np.zeros((mc + 1, nc + 1, tc + 1))
    for i in range(mc):
        for j in range(nc):
            for k in range(tc):
                m = mats[i, j, k]
                # transposed plane blocks
                z0 = m[0, 0, 0] * y[i, j, k, 0] + m[0, 1, 0] * y[i, j, k, 1]
                z1 = m[0, 0, 1] * y[i, j, k, 0] + m[0, 1, 1] * y[i, j, k, 1]
                z2 = m[1, 0, 0] * y[i, j, k, 2] + m[1, 1, 0] * y[i, j, k, 3]
                z3 = m[1, 0, 1] * y[i, j, k, 2] + m[1, 1, 1] * y[i, j, k, 3]
                z4 = m[2, 0, 0] * y[i, j, k, 4] + m[2, 1, 0] * y[i, j, k, 5]
                z5 = m[2, 0, 1] * y[i, j, k, 4] + m[2, 1, 1] * y[i, j, k, 5]
                # collapse duplicated channels, then scatter the +/- stencil
                g1 = z0 + z2
                g2 = z1 + z4
                g3 = z3 + z5
                out[i + 1, j, k] += g1
                out[i, j + 1, k] += g2
                out[i, j, k + 1] += g3
                out[i, j, k] -= g1 + g2 + g3
    return out
