"""Backend selection for the hot loops.

The compiled extension is used when it was built; setting
``CSLDS_PURE_PYTHON=1`` forces the NumPy fallback.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("CSLDS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
    except ImportError:
        _impl = _pykernels
    else:
        BACKEND = "cython"


def fwht_rows(a, backend=None):
    """Orthonormal Walsh-Hadamard transform along the last axis, in place.

    `a` must be a C-contiguous float64 array of shape (k, n), n a power of two.
    """
    impl = _pick(backend)
    impl.fwht_rows(a)
    return a


def hankel_fold(H, m, q, backend=None):
    """Project a (m*q, T-q+1) matrix onto block-Hankel structure.

    Returns the (m, T) sequence whose Hankel matrix is the orthogonal
    projection of `H`: each element is the mean of its anti-diagonal.
    """
    H = np.ascontiguousarray(H, dtype=np.float64)
    out = np.empty((m, H.shape[1] + q - 1))
    _pick(backend).hankel_fold(H, m, q, out)
    return out


def _pick(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _pykernels
    if backend == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown kernel backend {backend!r}")
