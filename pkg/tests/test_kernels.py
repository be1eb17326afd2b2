import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from cslds import kernels
from cslds.state_estim import hankel

from conftest import BACKENDS


def hadamard_oracle(a):
    n = a.shape[1]
    return a @ scipy.linalg.hadamard(n).T / np.sqrt(n)


def fold_oracle(H, m, q):
    """Average of every Hankel position that maps to sequence entry (i, t)."""
    T = H.shape[1] + q - 1
    out = np.zeros((m, T))
    for i in range(m):
        for t in range(T):
            vals = [H[b * m + i, t - b] for b in range(q) if 0 <= t - b < H.shape[1]]
            out[i, t] = np.mean(vals)
    return out


@pytest.mark.parametrize("n", [1, 2, 4, 64, 1024])
def test_fwht_matches_dense_hadamard(backend, rng, n):
    a = rng.standard_normal((3, n))
    expect = hadamard_oracle(a)
    kernels.fwht_rows(a, backend=backend)
    np.testing.assert_allclose(a, expect, atol=1e-12)


def test_fwht_two_point_example(backend):
    a = np.array([[1.0, 0.0]])
    kernels.fwht_rows(a, backend=backend)
    np.testing.assert_allclose(a, [[np.sqrt(0.5), np.sqrt(0.5)]], atol=1e-15)


def test_fwht_is_involution(backend, rng):
    a = rng.standard_normal((5, 256))
    b = a.copy()
    kernels.fwht_rows(b, backend=backend)
    kernels.fwht_rows(b, backend=backend)
    np.testing.assert_allclose(b, a, atol=1e-12)


def test_backends_agree(rng):
    if len(BACKENDS) < 2:
        pytest.skip("compiled backend not built")
    a = rng.standard_normal((7, 512))
    b = a.copy()
    kernels.fwht_rows(a, backend="python")
    kernels.fwht_rows(b, backend="cython")
    np.testing.assert_allclose(a, b, atol=1e-13)
    H = rng.standard_normal((12, 40))
    np.testing.assert_allclose(kernels.hankel_fold(H, 3, 4, backend="python"),
                               kernels.hankel_fold(H, 3, 4, backend="cython"), atol=1e-14)


def test_python_fwht_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        kernels.fwht_rows(np.zeros((1, 6)), backend="python")


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.fwht_rows(np.zeros((1, 4)), backend="fortran")


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 4), q=st.integers(1, 6), extra=st.integers(0, 8), seed=st.integers(0, 2**32 - 1))
def test_fold_matches_brute_force(m, q, extra, seed):
    T = q + extra
    H = np.random.default_rng(seed).standard_normal((m * q, T - q + 1))
    for b in BACKENDS:
        np.testing.assert_allclose(kernels.hankel_fold(H, m, q, backend=b), fold_oracle(H, m, q), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(m=st.integers(1, 3), q=st.integers(1, 5), extra=st.integers(0, 6), seed=st.integers(0, 2**32 - 1))
def test_fold_is_identity_on_hankel_matrices(m, q, extra, seed):
    seq = np.random.default_rng(seed).standard_normal((m, q + extra))
    for b in BACKENDS:
        np.testing.assert_allclose(kernels.hankel_fold(hankel(seq, q), m, q, backend=b), seq, atol=1e-12)


def test_fold_is_orthogonal_projection(rng):
    # <H - P(H), hankel(s)> = 0 for every sequence s
    m, q, T = 2, 4, 15
    H = rng.standard_normal((m * q, T - q + 1))
    P = hankel(kernels.hankel_fold(H, m, q), q)
    for _ in range(5):
        S = hankel(rng.standard_normal((m, T)), q)
        assert abs(np.sum((H - P) * S)) < 1e-10
