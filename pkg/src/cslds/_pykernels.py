"""NumPy implementations of the inner loops in :mod:`cslds._ckernels`."""

import numpy as np


def fwht_rows(a):
    """In-place orthonormal Walsh-Hadamard transform of every row of `a`."""
    k, n = a.shape
    if n & (n - 1):
        raise ValueError("row length must be a power of two")
    if n <= 1:
        return
    h = 1
    while h < n:
        view = a.reshape(k, n // (2 * h), 2, h)
        top = view[:, :, 0, :].copy()
        bot = view[:, :, 1, :]
        view[:, :, 0, :] += bot
        bot *= -1.0
        bot += top
        h *= 2
    a *= 1.0 / np.sqrt(n)


def hankel_fold(H, m, q, out):
    """Average the block anti-diagonals of `H` into `out` (m x T)."""
    ncol = H.shape[1]
    T = out.shape[1]
    if H.shape[0] != m * q or T != ncol + q - 1 or out.shape[0] != m:
        raise ValueError("shape mismatch between Hankel matrix and sequence")
    out[...] = 0.0
    counts = np.zeros(T)
    for i in range(q):
        out[:, i:i + ncol] += H[i * m:(i + 1) * m]
        counts[i:i + ncol] += 1.0
    out /= counts
