"""Measurement operators and sparsifying bases.

Measurements use a structured random projection: the frame is zero-padded
to the next power of two ``n``, multiplied by a random sign pattern,
permuted, passed through the orthonormal Walsh-Hadamard transform and
subsampled.  All operators in one ensemble share the sign pattern and the
permutation and differ only in which transform rows they keep, so a single
full transform of a frame yields every operator's measurements.

Sparsifying bases (2-D DCT, 2-D Haar, identity) are orthonormal and act on
flattened ``h x w`` images, batched along leading axes.
"""

from dataclasses import dataclass

import numpy as np
import scipy.fft

from . import kernels
from .errors import DimensionError


def next_pow2(N):
    return 1 << max(int(N) - 1, 0).bit_length()


@dataclass
class RowSampledFastOperator:
    """``y -> (H P D pad(y))[rows]`` with H the orthonormal Hadamard matrix.

    ``perm`` acts as ``u[i] = v[perm[i]]``; ``sign_flip`` is the diagonal D.
    """

    n: int
    N: int
    rows: np.ndarray
    sign_flip: np.ndarray
    perm: np.ndarray
    seed: int = None

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64)
        if self.n & (self.n - 1) or self.n < self.N:
            raise DimensionError(f"padded size n={self.n} must be a power of two >= N={self.N}")
        if self.rows.size and (self.rows.min() < 0 or self.rows.max() >= self.n):
            raise DimensionError("row indices out of range")
        if np.unique(self.rows).size != self.rows.size:
            raise DimensionError("row indices must be distinct")

    @property
    def m(self):
        return self.rows.size

    @classmethod
    def random(cls, N, m, seed):
        """Operator with `m` random rows and its own sign/permutation draws."""
        n = next_pow2(N)
        rng = np.random.default_rng(seed)
        sign, perm = _draw_transform(n, rng)
        rows = np.sort(rng.choice(n, size=m, replace=False))
        return cls(n, N, rows, sign, perm, seed)

    def full_forward(self, Y):
        """Full orthonormal transform of each column of `Y` (shape ``(N,)`` or ``(N, k)``)."""
        Y = np.asarray(Y, dtype=np.float64)
        vec = Y.ndim == 1
        batch = Y[None, :] if vec else Y.T
        if batch.shape[1] != self.N:
            raise DimensionError(f"expected length {self.N}, got {batch.shape[1]}")
        a = np.zeros((batch.shape[0], self.n))
        a[:, :self.N] = batch
        a *= self.sign_flip
        a = np.ascontiguousarray(a[:, self.perm])
        kernels.fwht_rows(a)
        return a[0] if vec else a.T

    def full_adjoint(self, W):
        """Adjoint of :meth:`full_forward`; `W` has ``n`` rows."""
        W = np.asarray(W, dtype=np.float64)
        vec = W.ndim == 1
        a = np.array(W[None, :] if vec else W.T, dtype=np.float64, order="C")
        if a.shape[1] != self.n:
            raise DimensionError(f"expected length {self.n}, got {a.shape[1]}")
        kernels.fwht_rows(a)
        out = np.empty_like(a)
        out[:, self.perm] = a
        out *= self.sign_flip
        out = out[:, :self.N]
        return out[0] if vec else out.T

    def apply(self, y):
        return self.full_forward(y)[self.rows]

    def adjoint(self, z):
        z = np.asarray(z, dtype=np.float64)
        if z.shape[0] != self.m:
            raise DimensionError(f"expected {self.m} measurements, got {z.shape[0]}")
        full = np.zeros((self.n,) + z.shape[1:])
        full[self.rows] = z
        return self.full_adjoint(full)

    def dense(self):
        """Explicit ``(m, N)`` matrix; only sensible for small N."""
        return self.full_forward(np.eye(self.N))[self.rows]

    def descriptor(self):
        return {"seed": self.seed, "n": self.n, "N": self.N, "m": self.m}


def op_apply(op, y):
    return op.apply(y)


def op_adjoint(op, z):
    return op.adjoint(z)


def _draw_transform(n, rng):
    sign = rng.choice(np.array([-1.0, 1.0]), size=n)
    perm = rng.permutation(n)
    return sign, perm


@dataclass
class MeasurementEnsemble:
    """One time-invariant operator plus one time-varying operator per frame.

    All operators share ``sign_flip`` and ``perm``; the innovation rows of
    frame t never coincide with the common rows.
    """

    common: RowSampledFastOperator
    innovation: list
    seed: int

    @property
    def T(self):
        return len(self.innovation)

    @property
    def N(self):
        return self.common.N

    @property
    def n(self):
        return self.common.n

    def frame_rows(self, t, with_common=True):
        """Transform rows measured in frame `t`: common rows first, then innovation."""
        if with_common:
            return np.concatenate([self.common.rows, self.innovation[t].rows])
        return self.innovation[t].rows

    def stacked_dense(self, t):
        """Dense ``[Phi_common; Phi_innov_t]`` for small-N checks."""
        full = self.common.full_forward(np.eye(self.N))
        return full[self.frame_rows(t)]


def make_measurement_ensemble(N, M_common, M_innov, T, seed):
    """Build the common operator and `T` innovation operators from `seed`.

    Each frame's rows come from its own generator keyed by ``(seed, t)``,
    so operators can be rebuilt for any subset of frames.
    """
    if M_common < 0 or M_innov < 0:
        raise ValueError("measurement counts must be non-negative")
    if M_common + M_innov > N:
        raise DimensionError(f"M_common + M_innov = {M_common + M_innov} exceeds N = {N}")
    n = next_pow2(N)
    sign, perm = _draw_transform(n, np.random.default_rng([seed, 0]))
    common_rows = np.sort(np.random.default_rng([seed, 1]).choice(n, size=M_common, replace=False))
    common = RowSampledFastOperator(n, N, common_rows, sign, perm, seed)
    free = np.setdiff1d(np.arange(n), common_rows)
    innovation = []
    for t in range(T):
        rows = np.sort(np.random.default_rng([seed, 2, t]).choice(free, size=M_innov, replace=False))
        innovation.append(RowSampledFastOperator(n, N, rows, sign, perm, seed))
    return MeasurementEnsemble(common, innovation, seed)


# -- sparsifying bases -------------------------------------------------------

BASIS_KINDS = ("dct2d", "haar2d", "identity")


@dataclass(frozen=True)
class SparsifyingBasis:
    """Orthonormal basis of ``h x w`` images; coefficients are flattened C-order."""

    kind: str
    h: int
    w: int

    def __post_init__(self):
        if self.kind not in BASIS_KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}; expected one of {BASIS_KINDS}")
        if self.kind == "haar2d" and (self.h & (self.h - 1) or self.w & (self.w - 1)):
            raise DimensionError(f"haar2d needs power-of-two dimensions, got {self.h}x{self.w}")

    @property
    def N(self):
        return self.h * self.w

    def analyze(self, y):
        """Coefficients ``Psi^T y``; `y` has shape ``(..., N)``."""
        img = self._as_images(y)
        if self.kind == "dct2d":
            out = scipy.fft.dctn(img, axes=(-2, -1), norm="ortho")
        elif self.kind == "haar2d":
            out = _haar2d(img)
        else:
            out = img.copy()
        return out.reshape(np.shape(y))

    def synthesize(self, c):
        """Image ``Psi c``; inverse of :meth:`analyze`."""
        img = self._as_images(c)
        if self.kind == "dct2d":
            out = scipy.fft.idctn(img, axes=(-2, -1), norm="ortho")
        elif self.kind == "haar2d":
            out = _ihaar2d(img)
        else:
            out = img.copy()
        return out.reshape(np.shape(c))

    def _as_images(self, v):
        v = np.asarray(v, dtype=np.float64)
        if v.shape[-1] != self.N:
            raise DimensionError(f"expected trailing length {self.N}, got {v.shape[-1]}")
        return v.reshape(v.shape[:-1] + (self.h, self.w))


def basis_analyze(basis, y):
    return basis.analyze(y)


def basis_synthesize(basis, coeffs):
    return basis.synthesize(coeffs)


_R2 = np.sqrt(0.5)


def _haar_levels(h, w):
    sizes = []
    while h > 1 or w > 1:
        sizes.append((h, w))
        h, w = max(h // 2, 1), max(w // 2, 1)
    return sizes


def _haar_step(x, axis, L):
    x = np.moveaxis(x, axis, -1)
    seg = x[..., :L].copy()
    x[..., :L // 2] = (seg[..., 0::2] + seg[..., 1::2]) * _R2
    x[..., L // 2:L] = (seg[..., 0::2] - seg[..., 1::2]) * _R2
    return np.moveaxis(x, -1, axis)


def _ihaar_step(x, axis, L):
    x = np.moveaxis(x, axis, -1)
    a = x[..., :L // 2].copy()
    b = x[..., L // 2:L].copy()
    x[..., 0:L:2] = (a + b) * _R2
    x[..., 1:L:2] = (a - b) * _R2
    return np.moveaxis(x, -1, axis)


def _haar2d(img):
    out = np.array(img, dtype=np.float64)
    for h, w in _haar_levels(*out.shape[-2:]):
        sub = out[..., :h, :w]
        if w > 1:
            sub = _haar_step(sub, -1, w)
        if h > 1:
            sub = _haar_step(sub, -2, h)
        out[..., :h, :w] = sub
    return out


def _ihaar2d(coef):
    out = np.array(coef, dtype=np.float64)
    for h, w in reversed(_haar_levels(*out.shape[-2:])):
        sub = out[..., :h, :w]
        if h > 1:
            sub = _ihaar_step(sub, -2, h)
        if w > 1:
            sub = _ihaar_step(sub, -1, w)
        out[..., :h, :w] = sub
    return out
