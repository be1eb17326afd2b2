"""State-sequence estimation from the common measurements.

The common measurements of an LDS video are themselves the output of the
LDS ``(Phi_common C, A)``, so their block-Hankel matrix factors as
``O [x_1 ... x_{T-q+1}]``.  A truncated SVD recovers the states up to an
invertible ``d x d`` transform.  Frames without common measurements are
filled in first by nuclear-norm Hankel completion.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionError, NumericalError
from .lds import estimate_transition

# completion schedule: tau_k = max(tau_0 * ratio**k, floor * sigma_1)
COMPLETION_TAU0 = 0.9
COMPLETION_RATIO = 0.99
COMPLETION_FLOOR = 1e-8
COMPLETION_MAX_ITER = 2000
COMPLETION_TOL = 1e-8


@dataclass
class HankelMatrix:
    """Block-Hankel matrix of an ``(M, T)`` measurement sequence.

    ``sequence`` holds the measurements with NaN columns where a frame is
    missing; ``H`` has zeros at those positions and ``mask`` marks the
    valid entries.
    """

    sequence: np.ndarray
    q: int
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sequence = np.atleast_2d(np.asarray(self.sequence, dtype=np.float64))
        if not 1 <= self.q <= self.T:
            raise DimensionError(f"Hankel depth q={self.q} must lie in [1, T={self.T}]")

    @property
    def M(self):
        return self.sequence.shape[0]

    @property
    def T(self):
        return self.sequence.shape[1]

    @property
    def observed(self):
        return ~np.isnan(self.sequence).any(axis=0)

    @property
    def H(self):
        return hankel(np.nan_to_num(self.sequence, nan=0.0), self.q)

    @property
    def mask(self):
        obs = np.broadcast_to(self.observed, self.sequence.shape)
        return hankel(obs.astype(np.float64), self.q) > 0.5

    @property
    def complete(self):
        return bool(self.observed.all())


def hankel(seq, q):
    """Stack ``q`` shifted copies of an ``(M, T)`` sequence into ``(M q, T - q + 1)``."""
    M, T = seq.shape
    ncol = T - q + 1
    return np.vstack([seq[:, i:i + ncol] for i in range(q)])


def build_hankel(common, q):
    """Hankel matrix from per-frame common measurements.

    `common` is either a list with ``None`` for missing frames or an
    ``(M, T)`` array with NaN columns.
    """
    if isinstance(common, np.ndarray):
        seq = np.atleast_2d(np.asarray(common, dtype=np.float64))
    else:
        sizes = {np.size(z) for z in common if z is not None}
        if len(sizes) > 1:
            raise DimensionError("common measurement vectors differ in length")
        M = sizes.pop() if sizes else 0
        seq = np.full((M, len(common)), np.nan)
        for t, z in enumerate(common):
            if z is not None:
                seq[:, t] = z
    if not 1 <= q <= seq.shape[1]:
        raise DimensionError(f"Hankel depth q={q} must lie in [1, T={seq.shape[1]}]")
    return HankelMatrix(seq, q)


@dataclass
class StateEstimate:
    """Truncated-SVD states ``S_d V_d^T`` of a Hankel matrix."""

    X: np.ndarray
    singular_values: np.ndarray
    q: int
    mean_removed: bool = False
    z_mean: np.ndarray = None
    U: np.ndarray = field(default=None, repr=False)

    @property
    def d(self):
        return self.X.shape[0]

    @property
    def T(self):
        """Number of frames covered by the measurement sequence."""
        return self.X.shape[1] + self.q - 1

    def full_states(self, T=None):
        """States for all `T` frames.

        The SVD yields ``T - q + 1`` states; the last ``q - 1`` are
        propagated with the least-squares transition fitted on the others.
        """
        T = self.T if T is None else T
        X = self.X
        if X.shape[1] >= T:
            return X[:, :T].copy()
        out = np.empty((self.d, T))
        out[:, :X.shape[1]] = X
        A = estimate_transition(X) if X.shape[1] >= 2 else np.eye(self.d)
        for t in range(X.shape[1], T):
            out[:, t] = A @ out[:, t - 1]
        return out


def estimate_states(H, d, remove_mean=False):
    """Top-`d` right singular subspace of `H`, scaled by the singular values.

    With `remove_mean`, every measurement channel is de-meaned over time
    before the Hankel matrix is formed and the mean is kept in ``z_mean``.
    """
    if not H.complete:
        raise NumericalError("masked_entries", "Hankel matrix has missing entries; complete it first")
    seq = H.sequence
    z_mean = None
    if remove_mean:
        z_mean = seq.mean(axis=1)
        seq = seq - z_mean[:, None]
    mat = hankel(seq, H.q)
    if not 1 <= d <= min(mat.shape):
        raise DimensionError(f"d={d} exceeds the Hankel dimensions {mat.shape}")
    U, s, Vt = np.linalg.svd(mat, full_matrices=False)
    X = s[:d, None] * Vt[:d]
    return StateEstimate(X, s, H.q, remove_mean, z_mean, U[:, :d])


def complete_hankel(H, rank_hint=None, *, tau0=COMPLETION_TAU0, ratio=COMPLETION_RATIO,
                    floor=COMPLETION_FLOOR, max_iter=COMPLETION_MAX_ITER, tol=COMPLETION_TOL):
    """Fill missing frames by nuclear-norm minimization over Hankel matrices.

    Alternates singular-value soft thresholding with projection onto the
    set of block-Hankel matrices that agree with the observed frames.  The
    threshold starts at ``tau0 * sigma_1`` of the zero-filled matrix and
    shrinks by `ratio` per iteration down to ``floor * sigma_1``.  The
    returned matrix carries ``info`` with ``converged``, ``iterations`` and
    the last relative change.
    """
    if H.complete:
        out = HankelMatrix(H.sequence.copy(), H.q)
        out.info = {"converged": True, "iterations": 0, "change": 0.0, "missing": 0}
        return out
    M, q = H.M, H.q
    if rank_hint is not None and M * q < rank_hint:
        raise DimensionError(f"block depth too small: M*q = {M * q} < rank hint {rank_hint}")
    obs = H.observed
    if not obs.any():
        raise NumericalError("no_observations", "no frame carries common measurements")
    z_obs = H.sequence[:, obs]

    seq = np.where(np.isnan(H.sequence), 0.0, H.sequence)
    cur = hankel(seq, q)
    sigma1 = np.linalg.norm(cur, 2)
    if sigma1 == 0:
        out = HankelMatrix(seq, q)
        out.info = {"converged": True, "iterations": 0, "change": 0.0, "missing": int((~obs).sum())}
        return out
    tau = tau0 * sigma1
    tau_min = floor * sigma1
    change = np.inf
    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        U, s, Vt = np.linalg.svd(cur, full_matrices=False)
        s = np.maximum(s - tau, 0.0)
        r = int(np.count_nonzero(s))
        low = (U[:, :r] * s[:r]) @ Vt[:r]
        seq = kernels.hankel_fold(low, M, q)
        seq[:, obs] = z_obs
        nxt = hankel(seq, q)
        change = np.linalg.norm(nxt - cur) / max(np.linalg.norm(cur), np.finfo(float).tiny)
        cur = nxt
        tau = max(tau * ratio, tau_min)
        if change < tol:
            converged = True
            break
    out = HankelMatrix(seq, q)
    out.info = {"converged": converged, "iterations": k, "change": float(change),
                "missing": int((~obs).sum()), "rank_hint": rank_hint}
    return out
