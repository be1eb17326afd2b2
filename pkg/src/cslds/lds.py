"""Linear dynamical system model of a video.

A video ``Y = [y_1 ... y_T]`` (frames as columns, ``N = h * w`` pixels) is
described by

    x_{t+1} = A x_t + v_t,        y_t = mu + C x_t + w_t

with isotropic Gaussian noises ``v_t`` and ``w_t``.  This module holds the
model containers, a simulator, PCA-based identification and the
observability tests used to decide whether a state sequence can be
recovered from a handful of projections per frame.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericalError

RANK_TOL = 1e-10
PINV_RCOND = 1e-12


@dataclass
class VideoTensor:
    """Frames stacked as columns of an ``(N, T)`` matrix."""

    Y: np.ndarray
    h: int
    w: int

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=np.float64)
        if self.Y.ndim != 2:
            raise DimensionError(f"video must be 2-D (N, T), got shape {self.Y.shape}")
        if self.h * self.w != self.Y.shape[0]:
            raise DimensionError(f"h*w = {self.h * self.w} does not match N = {self.Y.shape[0]}")
        if not np.all(np.isfinite(self.Y)):
            raise NumericalError("non_finite", "video contains non-finite entries")

    @property
    def N(self):
        return self.Y.shape[0]

    @property
    def T(self):
        return self.Y.shape[1]

    def frame(self, t):
        """Frame `t` (0-based) as an ``(h, w)`` image."""
        return self.Y[:, t].reshape(self.h, self.w)


@dataclass
class StateSequence:
    """States ``x_1 .. x_T`` as columns of a ``(d, T)`` matrix."""

    X: np.ndarray

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        if not np.all(np.isfinite(self.X)):
            raise NumericalError("non_finite", "state sequence contains non-finite entries")

    @property
    def d(self):
        return self.X.shape[0]

    @property
    def T(self):
        return self.X.shape[1]


@dataclass
class LdsModel:
    """System matrices of a video LDS.

    `mu` defaults to zeros (pure LDS).  When `h`/`w` are omitted the
    frame is treated as an ``N x 1`` column image.
    """

    C: np.ndarray
    A: np.ndarray
    mu: np.ndarray = None
    q_noise_std: float = 0.0
    r_noise_std: float = 0.0
    h: int = None
    w: int = None
    check_rank: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        self.C = np.atleast_2d(np.asarray(self.C, dtype=np.float64))
        self.A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        N, d = self.C.shape
        if self.A.shape != (d, d):
            raise DimensionError(f"A must be {d}x{d}, got {self.A.shape}")
        if d > N:
            raise DimensionError(f"state dimension d={d} exceeds N={N}")
        if self.mu is None:
            self.mu = np.zeros(N)
        self.mu = np.asarray(self.mu, dtype=np.float64).ravel()
        if self.mu.shape != (N,):
            raise DimensionError(f"mu must have length {N}")
        if self.h is None and self.w is None:
            self.h, self.w = N, 1
        if self.h * self.w != N:
            raise DimensionError(f"h*w = {self.h * self.w} does not match N = {N}")
        if self.q_noise_std < 0 or self.r_noise_std < 0:
            raise ValueError("noise standard deviations must be non-negative")
        if self.check_rank:
            s = np.linalg.svd(self.C, compute_uv=False)
            if s[-1] <= RANK_TOL * s[0]:
                raise NumericalError("rank_deficient_C", "observation matrix C is not full column rank")

    @property
    def N(self):
        return self.C.shape[0]

    @property
    def d(self):
        return self.C.shape[1]


def synthesize(model, x1, T, seed):
    """Simulate `T` frames of `model` starting from state `x1`.

    Returns ``(VideoTensor, StateSequence)``.  Process and observation noise
    are drawn from independent streams derived from `seed`.
    """
    x1 = np.asarray(x1, dtype=np.float64).ravel()
    if x1.shape != (model.d,):
        raise DimensionError(f"x1 must have length d={model.d}, got {x1.shape}")
    if T < 1:
        raise ValueError("T must be at least 1")
    if not np.all(np.isfinite(x1)):
        raise NumericalError("non_finite", "initial state is not finite")

    proc_rng, obs_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    X = np.empty((model.d, T))
    X[:, 0] = x1
    for t in range(1, T):
        X[:, t] = model.A @ X[:, t - 1]
        if model.q_noise_std > 0:
            X[:, t] += model.q_noise_std * proc_rng.standard_normal(model.d)
    Y = model.C @ X + model.mu[:, None]
    if model.r_noise_std > 0:
        Y += model.r_noise_std * obs_rng.standard_normal(Y.shape)
    return VideoTensor(Y, model.h, model.w), StateSequence(X)


def estimate_transition(states, return_info=False):
    """Least-squares transition matrix ``A = X[:, 1:] @ pinv(X[:, :-1])``.

    Singular values below ``1e-12 * sigma_max`` are discarded; the info dict
    reports ``rank_deficient`` when that happens.
    """
    X = states.X if isinstance(states, StateSequence) else np.atleast_2d(np.asarray(states, dtype=np.float64))
    d, T = X.shape
    if T < 2:
        raise DimensionError("need at least two states to estimate a transition")
    past, future = X[:, :-1], X[:, 1:]
    U, s, Vt = np.linalg.svd(past, full_matrices=False)
    keep = s > PINV_RCOND * s[0] if s.size and s[0] > 0 else np.zeros_like(s, dtype=bool)
    rank = int(keep.sum())
    A = (future @ Vt[keep].T / s[keep]) @ U[:, keep].T
    if not return_info:
        return A
    return A, {"rank": rank, "rank_deficient": rank < d}


def fit_oracle(video, d, subtract_mean=True):
    """PCA identification of an LDS from uncompressed frames.

    ``C`` holds the top-`d` left singular vectors of the (centered) data,
    the states are ``S_d V_d^T`` and ``A`` is fit by least squares on them.
    Noise levels are set from the residual standard deviations.
    """
    Y = video.Y
    N, T = Y.shape
    if not 1 <= d <= min(N, T):
        raise DimensionError(f"d={d} must lie in [1, min(N, T)] = [1, {min(N, T)}]")
    mu = Y.mean(axis=1) if subtract_mean else np.zeros(N)
    U, s, Vt = np.linalg.svd(Y - mu[:, None], full_matrices=False)
    C = U[:, :d]
    X = s[:d, None] * Vt[:d]
    if T >= 2:
        A = estimate_transition(X)
        q_std = float(np.std(X[:, 1:] - A @ X[:, :-1]))
    else:
        A, q_std = np.zeros((d, d)), 0.0
    r_std = float(np.std(Y - mu[:, None] - C @ X))
    model = LdsModel(C, A, mu, q_noise_std=q_std, r_noise_std=r_std, h=video.h, w=video.w, check_rank=False)
    return model, StateSequence(X)


def observability_matrix(C_eff, A, depth=None):
    """Stack ``[C; C A; ...; C A^(depth-1)]``; `depth` defaults to ``d``."""
    C_eff = np.atleast_2d(np.asarray(C_eff, dtype=np.float64))
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    d = A.shape[0]
    if A.shape != (d, d) or C_eff.shape[1] != d:
        raise DimensionError(f"C_eff {C_eff.shape} and A {A.shape} are incompatible")
    depth = d if depth is None else int(depth)
    if depth < 1:
        raise ValueError("depth must be at least 1")
    blocks = [C_eff]
    for _ in range(depth - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


@dataclass
class ObservabilityReport:
    observable: bool
    ratio: float
    singular_values: np.ndarray

    def __bool__(self):
        return self.observable


def is_observable(C_eff, A, depth=None, tol=RANK_TOL):
    """Rank test of the observability matrix.

    The pair is observable when ``sigma_d / sigma_1 > tol``; the returned
    report is truthy in that case and carries the ratio.
    """
    O = observability_matrix(C_eff, A, depth)
    d = O.shape[1]
    s = np.linalg.svd(O, compute_uv=False)
    if s.size < d or s[0] == 0:
        ratio = 0.0
    else:
        ratio = float(s[d - 1] / s[0])
    return ObservabilityReport(ratio > tol, ratio, s)
