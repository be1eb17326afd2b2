# cython: language_level=3
"""Compiled inner loops: batched Walsh-Hadamard butterflies and
block anti-diagonal folding of Hankel matrices."""

from libc.math cimport sqrt


def fwht_rows(double[:, ::1] a):
    """In-place orthonormal Walsh-Hadamard transform of every row of `a`."""
    cdef Py_ssize_t k = a.shape[0]
    cdef Py_ssize_t n = a.shape[1]
    cdef Py_ssize_t r, h, i, j
    cdef double u, v, scale
    if n & (n - 1):
        raise ValueError("row length must be a power of two")
    if n <= 1:
        return
    scale = 1.0 / sqrt(<double>n)
    with nogil:
        for r in range(k):
            h = 1
            while h < n:
                i = 0
                while i < n:
                    for j in range(i, i + h):
                        u = a[r, j]
                        v = a[r, j + h]
                        a[r, j] = u + v
                        a[r, j + h] = u - v
                    i += 2 * h
                h *= 2
            for j in range(n):
                a[r, j] *= scale


def hankel_fold(double[:, ::1] H, Py_ssize_t m, Py_ssize_t q, double[:, ::1] out):
    """Average the block anti-diagonals of `H` into `out` (m x T)."""
    cdef Py_ssize_t ncol = H.shape[1]
    cdef Py_ssize_t T = out.shape[1]
    cdef Py_ssize_t i, j, c, t
    cdef double cnt
    if H.shape[0] != m * q or T != ncol + q - 1 or out.shape[0] != m:
        raise ValueError("shape mismatch between Hankel matrix and sequence")
    with nogil:
        for c in range(m):
            for t in range(T):
                out[c, t] = 0.0
        for i in range(q):
            for c in range(m):
                for j in range(ncol):
                    out[c, i + j] += H[i * m + c, j]
        for t in range(T):
            # number of (i, j) pairs with i + j = t
            cnt = <double>(min(t, q - 1) - max(0, t - ncol + 1) + 1)
            for c in range(m):
                out[c, t] /= cnt
