"""Simulated two-part compressive acquisition of a video.

Every frame receives ``M_common`` measurements through a fixed operator
(used later to identify the state sequence) and ``M_innov`` measurements
through a frame-specific operator (pooled over time to recover the
observation matrix).  Common measurements can be skipped for a set of
frames.  Frame indices are 0-based throughout.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericalError
from .transforms import make_measurement_ensemble, next_pow2


@dataclass
class MeasurementPlan:
    N: int
    T: int
    M_common: int
    M_innov: int
    noise_std: float = 0.0
    ensemble_seed: int = 0
    missing: tuple = ()

    def __post_init__(self):
        self.missing = tuple(sorted(int(t) for t in set(self.missing)))
        if self.missing and (self.missing[0] < 0 or self.missing[-1] >= self.T):
            raise DimensionError(f"missing frames must lie in [0, {self.T})")
        if self.M_common < 0 or self.M_innov < 0:
            raise ValueError("measurement counts must be non-negative")
        if self.M_common + self.M_innov > self.N:
            raise DimensionError(f"M_common + M_innov = {self.M_common + self.M_innov} exceeds N = {self.N}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")

    @property
    def observed(self):
        """Boolean mask of frames that carry common measurements."""
        mask = np.ones(self.T, dtype=bool)
        mask[list(self.missing)] = False
        return mask

    @property
    def compression_ratio(self):
        """``N / M`` with M the average number of measurements per frame."""
        per_frame = self.M_innov + self.M_common * (1 - len(self.missing) / self.T)
        return self.N / per_frame if per_frame > 0 else math.inf

    def ensemble(self):
        return make_measurement_ensemble(self.N, self.M_common, self.M_innov, self.T, self.ensemble_seed)


@dataclass
class CompressiveStream:
    """Measurements of a video; ``common[t]`` is ``None`` for missing frames."""

    common: list
    innovation: list
    plan: MeasurementPlan
    noise_seed: int = 0
    _ensemble: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        T = self.plan.T
        if len(self.common) != T or len(self.innovation) != T:
            raise DimensionError("stream length does not match plan.T")
        missing = set(self.plan.missing)
        for t, z in enumerate(self.common):
            if (z is None) != (t in missing):
                raise DimensionError(f"frame {t}: common measurement presence disagrees with the missing set")

    @property
    def T(self):
        return self.plan.T

    def ensemble(self):
        if self._ensemble is None:
            self._ensemble = self.plan.ensemble()
        return self._ensemble

    def common_matrix(self):
        """``(M_common, T)`` array with NaN columns for missing frames."""
        Z = np.full((self.plan.M_common, self.T), np.nan)
        for t, z in enumerate(self.common):
            if z is not None:
                Z[:, t] = z
        return Z

    def innovation_matrix(self):
        return np.column_stack(self.innovation) if self.T else np.zeros((self.plan.M_innov, 0))


def acquire(video, plan, noise_seed=0, ensemble=None):
    """Measure `video` according to `plan`.

    Noise for frame t comes from a generator keyed by ``(noise_seed, t)``,
    so the stream does not depend on evaluation order.
    """
    if plan.N != video.N or plan.T != video.T:
        raise DimensionError(f"plan is for N={plan.N}, T={plan.T}; video has N={video.N}, T={video.T}")
    ens = ensemble if ensemble is not None else plan.ensemble()
    full = ens.common.full_forward(video.Y)
    missing = set(plan.missing)
    common, innovation = [], []
    for t in range(plan.T):
        rng = np.random.default_rng([noise_seed, t])
        e_common = rng.standard_normal(plan.M_common)
        e_innov = rng.standard_normal(plan.M_innov)
        if t in missing:
            common.append(None)
        else:
            common.append(full[ens.common.rows, t] + plan.noise_std * e_common)
        innovation.append(full[ens.innovation[t].rows, t] + plan.noise_std * e_innov)
    return CompressiveStream(common, innovation, plan, noise_seed, ens)


def missing_pattern(T, fraction, kind="random", seed=0):
    """Frames without common measurements, as a sorted tuple.

    ``kind="random"`` drops a uniformly random subset; ``"periodic"`` keeps
    evenly spaced frames.  Note that with one common measurement a gap at
    every other frame cannot be completed: negating the missing samples
    gives another sequence of the same LDS order.
    """
    if not 0 <= fraction <= 1:
        raise ValueError("fraction must be in [0, 1]")
    n_missing = int(round(fraction * T))
    if kind == "random":
        dropped = np.random.default_rng([seed, 3]).choice(T, size=n_missing, replace=False)
    elif kind == "periodic":
        n_keep = T - n_missing
        keep = np.unique(np.round(np.linspace(0, T - 1, n_keep)).astype(int)) if n_keep else []
        dropped = np.setdiff1d(np.arange(T), keep)
    else:
        raise ValueError(f"unknown missing pattern {kind!r}")
    return tuple(sorted(int(t) for t in dropped))


@dataclass
class BudgetReport:
    M_innov_required: int
    d: int
    K: int
    N: int
    T: int
    c: float = 4.0


def innovation_budget(d, K, N, T):
    """Innovation measurements per frame from ``M T = 4 d K ln(N / K)``."""
    if not 1 <= K < N:
        raise ValueError(f"need 1 <= K < N, got K={K}, N={N}")
    if d < 1 or T < 1:
        raise ValueError("d and T must be positive")
    total = 4.0 * d * K * math.log(N / K)
    return BudgetReport(max(1, math.ceil(total / T)), d, K, N, T)


def input_snr(video, noise_std):
    """``10 log10(sum_t ||y_t||^2 / (T sigma^2))`` in dB; +inf for zero noise."""
    if noise_std < 0:
        raise ValueError("noise_std must be non-negative")
    energy = float(np.sum(video.Y ** 2))
    if noise_std == 0:
        return math.inf
    if energy == 0:
        raise NumericalError("undefined_snr", "zero-energy video has no input SNR")
    return 10.0 * math.log10(energy / (video.T * noise_std ** 2))


def noise_std_for_input_snr(video, snr_db, n=None):
    """Per-measurement noise std that realizes input SNR `snr_db`.

    The input SNR is referenced to ±1 measurement patterns (entries of unit
    variance, as on a single-pixel camera's mirror array).  Operator rows
    here have unit norm, i.e. they are such patterns scaled by ``1/sqrt(n)``,
    so the pattern-level sigma is scaled by the same factor.  ``n=1``
    returns the pattern-level sigma itself.
    """
    if math.isinf(snr_db):
        return 0.0
    n = next_pow2(video.N) if n is None else n
    sigma = math.sqrt(float(np.sum(video.Y ** 2)) / (video.T * 10.0 ** (snr_db / 10.0)))
    return sigma / math.sqrt(n)


def pattern_input_snr(video, noise_std, n=None):
    """Input SNR of a per-measurement noise level, referenced to ±1 patterns.

    Inverse of :func:`noise_std_for_input_snr`.
    """
    n = next_pow2(video.N) if n is None else n
    return input_snr(video, noise_std * math.sqrt(n))
