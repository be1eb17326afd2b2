"""Shared builders for test instances."""

import math

import numpy as np

from cslds.acquisition import MeasurementPlan, acquire
from cslds.lds import VideoTensor
from cslds.transforms import SparsifyingBasis


def planted_instance(seed, N=256, d=3, K=8, T=37, M_innov=9, M_common=0, h=16, w=16, noise_std=0.0):
    """Row-sparse C = Psi S in the 2-D DCT basis, Gaussian states, compressive stream."""
    rng = np.random.default_rng(seed)
    basis = SparsifyingBasis("dct2d", h, w)
    S = np.zeros((N, d))
    support = np.sort(rng.choice(N, K, replace=False))
    S[support] = rng.standard_normal((K, d))
    C = basis.synthesize(S.T).T
    X = rng.standard_normal((d, T))
    video = VideoTensor(C @ X, h, w)
    stream = acquire(video, MeasurementPlan(N, T, M_common, M_innov, noise_std, seed), noise_seed=seed)
    return {"C": C, "S": S, "support": support, "X": X, "video": video, "stream": stream, "basis": basis}


def planted_budget(d=3, K=8, N=256):
    return math.ceil(4 * d * K * math.log(N / K))
