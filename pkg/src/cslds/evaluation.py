"""Reconstruction metrics, subspace registration and LDS classification."""

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, NumericalError
from .lds import observability_matrix

PINV_RCOND = 1e-12


def snr_db(truth, estimate):
    """``10 log10(||truth||^2 / ||truth - estimate||^2)`` for arrays of equal shape.

    Returns ``math.inf`` for an exact match; raises on zero-energy truth.
    """
    truth = np.asarray(truth, dtype=np.float64)
    estimate = np.asarray(estimate, dtype=np.float64)
    if truth.shape != estimate.shape:
        raise DimensionError(f"shape mismatch {truth.shape} vs {estimate.shape}")
    energy = float(np.sum(truth ** 2))
    if energy == 0:
        raise NumericalError("undefined_snr", "reference signal has zero energy")
    err = float(np.sum((truth - estimate) ** 2))
    if err == 0:
        return math.inf
    return 10.0 * math.log10(energy / err)


def reconstruction_snr(truth, estimate):
    """Video reconstruction SNR in dB, summed over all frames."""
    return snr_db(truth.Y, estimate.Y)


@dataclass
class Registration:
    L: np.ndarray
    aligned: np.ndarray
    error: float
    rank_deficient: bool = False


def register(C_hat, C_ref):
    """Best ``d x d`` map ``L = pinv(C_hat) C_ref`` aligning `C_hat` to `C_ref`."""
    C_hat = np.atleast_2d(np.asarray(C_hat, dtype=np.float64))
    C_ref = np.atleast_2d(np.asarray(C_ref, dtype=np.float64))
    if C_hat.shape[0] != C_ref.shape[0]:
        raise DimensionError(f"row counts differ: {C_hat.shape} vs {C_ref.shape}")
    s = np.linalg.svd(C_hat, compute_uv=False)
    rank_deficient = s.size == 0 or s[-1] <= PINV_RCOND * s[0] or s.size < C_hat.shape[1]
    if rank_deficient:
        warnings.warn("register: C_hat is rank deficient; using a truncated pseudo-inverse", RuntimeWarning)
    L = np.linalg.pinv(C_hat, rcond=PINV_RCOND) @ C_ref
    aligned = C_hat @ L
    return Registration(L, aligned, float(np.linalg.norm(aligned - C_ref)), rank_deficient)


def register_states(X_hat, X_ref):
    """Left-multiply `X_hat` by the ``d x d`` map that best matches `X_ref`."""
    reg = register(np.asarray(X_hat).T, np.asarray(X_ref).T)
    return reg.aligned.T


def state_snr(X_hat, X_ref):
    """SNR of a state estimate after optimal linear registration."""
    return snr_db(X_ref, register_states(X_hat, X_ref))


def max_principal_angle(A, B):
    """Largest principal angle (radians) between the column spaces of A and B."""
    return float(np.max(scipy.linalg.subspace_angles(np.asarray(A), np.asarray(B))))


@dataclass
class SubspaceDescriptor:
    """Orthonormal basis of the observability column space of an LDS."""

    Q: np.ndarray
    depth: int
    rank_deficient: bool = False

    @classmethod
    def from_model(cls, C, A, depth=None, tol=1e-10):
        O = observability_matrix(C, A, depth)
        U, s, _ = np.linalg.svd(O, full_matrices=False)
        d = O.shape[1]
        rank = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
        if rank < d:
            warnings.warn(f"observability matrix has rank {rank} < {d}", RuntimeWarning)
        return cls(U[:, :rank], depth if depth is not None else d, rank < d)

    @property
    def d(self):
        return self.Q.shape[1]


def procrustes_distance2(a, b):
    """Squared Procrustes distance ``min_R ||Q1 - Q2 R||_F^2 = d - ||Q2^T Q1||_F^2``.

    Subspaces of different rank are compared on the smaller dimension.
    """
    Q1 = getattr(a, "Q", a)
    Q2 = getattr(b, "Q", b)
    if Q1.shape[0] != Q2.shape[0]:
        raise DimensionError(f"descriptors live in different spaces: {Q1.shape} vs {Q2.shape}")
    d = min(Q1.shape[1], Q2.shape[1])
    return max(0.0, float(d - np.sum((Q2.T @ Q1) ** 2)))


def distance_matrix(descs_a, descs_b):
    return np.array([[procrustes_distance2(a, b) for b in descs_b] for a in descs_a])


def nn_classify(train, query, depth=None):
    """Label of the training model nearest to `query` in Procrustes distance.

    `train` is a sequence of ``(model, label)`` pairs; models need ``C`` and
    ``A`` attributes.  Ties go to the earliest training entry.
    """
    if not train:
        raise ValueError("training set is empty")
    qd = query if isinstance(query, SubspaceDescriptor) else SubspaceDescriptor.from_model(query.C, query.A, depth)
    best, best_label = math.inf, None
    for model, label in train:
        td = model if isinstance(model, SubspaceDescriptor) else SubspaceDescriptor.from_model(model.C, model.A, depth)
        dist = procrustes_distance2(td, qd)
        if dist < best:
            best, best_label = dist, label
    return best_label


def confusion_matrix(true_labels, predicted, labels=None):
    labels = sorted(set(true_labels) | set(predicted)) if labels is None else list(labels)
    pos = {lab: i for i, lab in enumerate(labels)}
    M = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(true_labels, predicted):
        M[pos[t], pos[p]] += 1
    return M, labels
