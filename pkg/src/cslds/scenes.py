"""Synthetic dynamic-texture scenes with known LDS ground truth.

Three kinds are available:

``blinking_blobs``
    Gaussian blobs whose brightnesses are the state components, so each
    blob blinks with the frequency of its dynamics block.
``oscillating_modes``
    Separable 2-D cosines (DCT-II atoms with distinct frequency pairs)
    driven by the same kind of dynamics.  The resulting C is exactly sparse
    in the 2-D DCT basis.
``static_plus_lds``
    ``oscillating_modes`` on top of a smooth static background ``mu``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .lds import LdsModel, synthesize

KINDS = ("blinking_blobs", "oscillating_modes", "static_plus_lds")


@dataclass
class SceneSpec:
    """Description of a synthetic scene.

    Parameters
    ----------
    kind : str
        One of ``KINDS``.
    h, w : int
        Frame size.
    d : int
        State dimension.
    temporal : sequence of (magnitude, phase), optional
        Eigenvalue descriptors.  A phase strictly between 0 and pi yields a
        2x2 rotation-scaling block (two state dimensions); phase 0 or pi a
        real 1x1 block.  The block sizes must add up to `d`.  When omitted,
        ``d // 2`` unit-magnitude pairs with distinct random phases are used,
        plus one real eigenvalue 1 when `d` is odd.
    spatial_smoothness : float
        Blob width relative to ``min(h, w)``; for cosine modes, the fraction
        of the frequency plane that frequencies are drawn from.
    seed : int
        Seed for every random choice (positions, frequencies, phases, noise).
    """

    kind: str
    h: int
    w: int
    d: int
    temporal: tuple = None
    spatial_smoothness: float = 0.1
    seed: int = 0
    q_noise_std: float = 0.0
    r_noise_std: float = 0.0
    amplitude: float = 1.0
    background: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scene kind {self.kind!r}; expected one of {KINDS}")
        if self.h < 1 or self.w < 1:
            raise DimensionError("frame size must be positive")
        if not 1 <= self.d <= self.h * self.w:
            raise DimensionError(f"d={self.d} must lie in [1, N={self.h * self.w}]")
        if not self.spatial_smoothness > 0:
            raise ValueError("spatial_smoothness must be positive")
        if self.temporal is not None:
            self.temporal = tuple((float(m), float(p)) for m, p in self.temporal)
            for m, _ in self.temporal:
                if not 0 < m <= 1:
                    raise ValueError(f"unstable or degenerate eigenvalue magnitude {m}; need 0 < |lambda| <= 1")
            if sum(_block_size(p) for _, p in self.temporal) != self.d:
                raise DimensionError("temporal descriptors do not add up to d state dimensions")

    @property
    def N(self):
        return self.h * self.w


def _block_size(phase):
    return 1 if np.isclose(np.sin(phase), 0.0, atol=1e-12) else 2


def _default_temporal(d, rng):
    n_pairs = d // 2
    # distinct phases keep the eigenvalues unique (diagonalizable A)
    phases = np.sort(rng.uniform(0.05, np.pi - 0.05, size=n_pairs))
    while n_pairs > 1 and np.min(np.diff(phases)) < 1e-3:
        phases = np.sort(rng.uniform(0.05, np.pi - 0.05, size=n_pairs))
    out = [(1.0, float(p)) for p in phases]
    if d % 2:
        out.append((1.0, 0.0))
    return tuple(out)


def transition_from_descriptors(temporal):
    """Block-diagonal real transition matrix for eigenvalue descriptors."""
    blocks = []
    for mag, phase in temporal:
        if _block_size(phase) == 1:
            blocks.append(np.array([[mag * np.cos(phase)]]))
        else:
            c, s = np.cos(phase), np.sin(phase)
            blocks.append(mag * np.array([[c, -s], [s, c]]))
    d = sum(b.shape[0] for b in blocks)
    A = np.zeros((d, d))
    i = 0
    for b in blocks:
        k = b.shape[0]
        A[i:i + k, i:i + k] = b
        i += k
    return A


def _dct_atom(h, w, kx, ky):
    """Unit-norm separable DCT-II atom with vertical frequency `ky`."""
    def axis(n, k):
        v = np.cos(np.pi * k * (np.arange(n) + 0.5) / n)
        return v / np.linalg.norm(v)
    return np.outer(axis(h, ky), axis(w, kx)).ravel()


def _cosine_modes(spec, rng):
    hmax = max(1, int(np.ceil(spec.h * min(1.0, spec.spatial_smoothness))))
    wmax = max(1, int(np.ceil(spec.w * min(1.0, spec.spatial_smoothness))))
    pairs = [(ky, kx) for ky in range(hmax) for kx in range(wmax) if (ky, kx) != (0, 0)]
    if len(pairs) < spec.d:
        pairs = [(ky, kx) for ky in range(spec.h) for kx in range(spec.w) if (ky, kx) != (0, 0)]
    if len(pairs) < spec.d:
        raise DimensionError(f"not enough distinct frequencies for d={spec.d}")
    chosen = rng.choice(len(pairs), size=spec.d, replace=False)
    C = np.column_stack([_dct_atom(spec.h, spec.w, pairs[i][1], pairs[i][0]) for i in chosen])
    return spec.amplitude * C


def _blob_modes(spec, rng):
    sigma = spec.spatial_smoothness * min(spec.h, spec.w)
    yy, xx = np.mgrid[0:spec.h, 0:spec.w]
    cols = []
    for _ in range(spec.d):
        cy, cx = rng.uniform(0, spec.h - 1), rng.uniform(0, spec.w - 1)
        cols.append(np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma ** 2)).ravel())
    C = np.column_stack(cols)
    return spec.amplitude * C / np.linalg.norm(C, axis=0)


def _initial_state(temporal, rng):
    # unit-norm per block so every mode carries energy
    x = []
    for _, phase in temporal:
        if _block_size(phase) == 1:
            x.append(1.0)
        else:
            a = rng.uniform(0, 2 * np.pi)
            x.extend([np.cos(a), np.sin(a)])
    return np.array(x)


def generate_scene(spec, T, x1=None):
    """Render `T` frames of `spec`.

    Returns ``(VideoTensor, LdsModel, StateSequence)``.  `x1` defaults to a
    state with unit norm in every dynamics block and a random phase.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(spec.seed).spawn(4)]
    temporal = spec.temporal if spec.temporal is not None else _default_temporal(spec.d, rngs[0])
    for mag, _ in temporal:
        if not 0 < mag <= 1:
            raise ValueError(f"unstable eigenvalue magnitude {mag}")
    A = transition_from_descriptors(temporal)
    if spec.kind == "blinking_blobs":
        C = _blob_modes(spec, rngs[1])
    else:
        C = _cosine_modes(spec, rngs[1])
    mu = None
    if spec.kind == "static_plus_lds":
        mu = spec.background * _background(spec, rngs[2])
    model = LdsModel(C, A, mu, spec.q_noise_std, spec.r_noise_std, spec.h, spec.w)
    if x1 is None:
        x1 = _initial_state(temporal, rngs[3])
    video, states = synthesize(model, x1, T, spec.seed)
    return video, model, states


def _background(spec, rng):
    """Unit-norm smooth positive background: two broad blobs over a flat level."""
    yy, xx = np.mgrid[0:spec.h, 0:spec.w]
    img = np.ones((spec.h, spec.w))
    s = 0.35 * min(spec.h, spec.w)
    for _ in range(2):
        cy, cx = rng.uniform(0, spec.h - 1), rng.uniform(0, spec.w - 1)
        img += np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * s ** 2))
    img = img.ravel()
    return img / np.linalg.norm(img)


def random_system(N, d, seed, h=None, w=None):
    """Random observable LDS without spatial structure.

    ``C`` is i.i.d. Gaussian, ``A`` is an orthogonal similarity transform of
    ``d // 2`` unit-modulus rotation blocks with phases in ``(0.05, pi - 0.05)``
    (plus a real eigenvalue 1 for odd `d`), and the returned initial state
    has unit norm.  Returns ``(LdsModel, x1)``.
    """
    rng = np.random.default_rng(seed)
    C = rng.standard_normal((N, d))
    B = transition_from_descriptors(_default_temporal(d, rng))
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    x1 = rng.standard_normal(d)
    x1 /= np.linalg.norm(x1)
    if h is None:
        h, w = N, 1
    return LdsModel(C, Q @ B @ Q.T, h=h, w=w), x1
