import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cslds.acquisition import MeasurementPlan, acquire
from cslds.errors import DimensionError, NumericalError
from cslds.evaluation import snr_db
from cslds.lds import StateSequence, VideoTensor
from cslds.recovery import (RecoveredModel, RecoveryConfig, _top, cgls, reconstruct_video,
                            recover_from_measurements, recover_observation)
from cslds.transforms import SparsifyingBasis

from helpers import planted_budget, planted_instance


def plain_cosamp(A, z, K, iters):
    """Textbook CoSaMP on a dense sensing matrix with exact least squares.

    Same conventions as the library: residual initialised to z, merge the
    2K largest proxy entries into the previous support, prune to K,
    ties to the lowest index, fixed number of iterations.
    """
    def top(v, k):
        return np.sort(np.argsort(-v, kind="stable")[:k])

    x = np.zeros(A.shape[1])
    supp = np.zeros(0, dtype=int)
    v = z.copy()
    for _ in range(iters):
        omega = np.union1d(supp, top((A.T @ v) ** 2, 2 * K))
        b = np.zeros_like(x)
        b[omega] = np.linalg.lstsq(A[:, omega], z, rcond=None)[0]
        supp = top(b ** 2, K)
        x = np.zeros_like(x)
        x[supp] = b[supp]
        v = z - A @ x
    return x


def test_top_breaks_ties_by_lowest_index():
    np.testing.assert_array_equal(_top(np.array([1.0, 3.0, 3.0, 0.5, 3.0]), 2), [1, 2])
    np.testing.assert_array_equal(_top(np.zeros(4), 2), [0, 1])
    assert _top(np.ones(3), 0).size == 0 and _top(np.ones(3), 9).size == 3


def test_cgls_solves_least_squares(rng):
    A = rng.standard_normal((30, 8))
    b = rng.standard_normal(30)
    x, info = cgls(lambda u: A @ u, lambda r: A.T @ r, b, np.zeros(8), 100, 1e-12)
    np.testing.assert_allclose(x, np.linalg.lstsq(A, b, rcond=None)[0], atol=1e-9)
    assert info["converged"] and not info["breakdown"]
    x, info = cgls(lambda u: A @ u, lambda r: A.T @ r, b, np.zeros(8), 2, 1e-14)
    assert not info["converged"] and info["iterations"] == 2


def test_config_validation():
    B = SparsifyingBasis("dct2d", 4, 4)
    RecoveryConfig(K=8, basis_C=B).validate(16)
    with pytest.raises(ValueError):
        RecoveryConfig(K=9, basis_C=B).validate(16)
    with pytest.raises(ValueError):
        RecoveryConfig(K=0, basis_C=B).validate(16)
    RecoveryConfig(K=16, basis_C=B, grouping="per_column").validate(16)
    with pytest.raises(ValueError):
        RecoveryConfig(K=2, basis_C=B, grouping="blocks").validate(16)
    with pytest.raises(DimensionError):
        RecoveryConfig(K=2, basis_C=SparsifyingBasis("dct2d", 4, 2)).validate(16)
    with pytest.raises(DimensionError):
        RecoveryConfig(K=2, K_mu=2, basis_C=B).validate(16)


def test_planted_exact_recovery():
    M = -(-planted_budget() // 37)
    inst = planted_instance(0, M_innov=M)
    rec = recover_observation(inst["stream"], inst["X"], RecoveryConfig(K=8, basis_C=inst["basis"]))
    assert np.linalg.norm(rec.C - inst["C"]) / np.linalg.norm(inst["C"]) < 1e-6
    np.testing.assert_array_equal(rec.support, inst["support"])
    assert rec.converged and isinstance(rec, RecoveredModel)
    video = reconstruct_video(rec, StateSequence(inst["X"]), 16, 16)
    assert snr_db(inst["video"].Y, video.Y) >= 100


def test_planted_with_common_measurements():
    inst = planted_instance(3, M_innov=6, M_common=4)
    rec = recover_observation(inst["stream"], inst["X"], RecoveryConfig(K=8, basis_C=inst["basis"]))
    assert np.linalg.norm(rec.C - inst["C"]) / np.linalg.norm(inst["C"]) < 1e-6
    rec2 = recover_observation(inst["stream"], inst["X"],
                               RecoveryConfig(K=8, basis_C=inst["basis"], use_common=False))
    assert rec2.iterations >= 1


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_row_group_invariants(seed):
    inst = planted_instance(seed, M_innov=6, noise_std=1e-3)
    rec = recover_observation(inst["stream"], inst["X"], RecoveryConfig(K=8, basis_C=inst["basis"], max_iters=6))
    assert rec.support.size <= 8
    outside = np.setdiff1d(np.arange(256), rec.support)
    assert np.all(rec.coef[outside] == 0)
    # least squares on the merged support never increases the objective
    before = [float(np.sum(inst["stream"].innovation_matrix() ** 2))] + rec.residual_history[:-1]
    for b, a in zip(before, rec.ls_residual_history):
        assert a <= b * (1 + 1e-9) + 1e-18


def test_per_column_grouping():
    inst = planted_instance(5, M_innov=12)
    rec = recover_observation(inst["stream"], inst["X"],
                              RecoveryConfig(K=8, basis_C=inst["basis"], grouping="per_column"))
    assert np.linalg.norm(rec.C - inst["C"]) / np.linalg.norm(inst["C"]) < 1e-6
    assert all(np.count_nonzero(rec.coef[:, i]) <= 8 for i in range(3))


def test_zero_measurements():
    video = VideoTensor(np.zeros((64, 10)), 8, 8)
    stream = acquire(video, MeasurementPlan(64, 10, 2, 5))
    X = np.random.default_rng(0).standard_normal((2, 10))
    rec = recover_observation(stream, X, RecoveryConfig(K=4, basis_C=SparsifyingBasis("dct2d", 8, 8)))
    assert np.all(rec.C == 0) and rec.converged and rec.iterations == 1


def test_degenerate_states():
    inst = planted_instance(1)
    X = np.vstack([inst["X"][0], inst["X"][0], inst["X"][1]])
    with pytest.raises(NumericalError) as e:
        recover_observation(inst["stream"], X, RecoveryConfig(K=8, basis_C=inst["basis"]))
    assert e.value.reason == "states_not_exciting"
    with pytest.raises(DimensionError):
        recover_observation(inst["stream"], inst["X"][:, :10], RecoveryConfig(K=8, basis_C=inst["basis"]))


def test_single_column_matches_plain_cosamp():
    rng = np.random.default_rng(2)
    h = w = 8
    N, T, M, K = 64, 6, 5, 4
    basis = SparsifyingBasis("dct2d", h, w)
    coef = rng.standard_normal(N) * np.exp(-0.15 * np.arange(N))     # compressible, not sparse
    y = basis.synthesize(coef)
    video = VideoTensor(np.tile(y[:, None], T), h, w)
    stream = acquire(video, MeasurementPlan(N, T, 2, M, noise_std=1e-3, ensemble_seed=4), noise_seed=1)
    X = np.ones((1, T))
    iters = 4
    cfg = RecoveryConfig(K=K, basis_C=basis, max_iters=iters, tol=0.0, ls_iters=500, ls_tol=1e-15)
    rec = recover_observation(stream, X, cfg)
    ens = stream.ensemble()
    Psi = basis.synthesize(np.eye(N)).T
    A = np.vstack([ens.stacked_dense(t) @ Psi for t in range(T)])
    z = np.concatenate([np.concatenate([stream.common[t], stream.innovation[t]]) for t in range(T)])
    ref = plain_cosamp(A, z, K, iters)
    assert rec.iterations == iters
    np.testing.assert_allclose(rec.coef[:, 0], ref, atol=1e-8)


def test_ambiguity_equivariance(rng):
    inst = planted_instance(4, M_innov=9)
    cfg = RecoveryConfig(K=8, basis_C=inst["basis"])
    rec = recover_observation(inst["stream"], inst["X"], cfg)
    L = np.eye(3) + 0.3 * rng.standard_normal((3, 3))
    X2 = np.linalg.solve(L, inst["X"])
    rec2 = recover_observation(inst["stream"], X2, cfg)
    V1, V2 = rec.C @ inst["X"], rec2.C @ X2
    assert np.linalg.norm(V1 - V2) / np.linalg.norm(V1) < 1e-6


def test_error_grows_as_innovation_shrinks():
    budgets = (9, 6, 4, 2)
    means = []
    for M in budgets:
        errs = []
        for seed in range(20):
            inst = planted_instance(seed, M_innov=M)
            rec = recover_observation(inst["stream"], inst["X"],
                                      RecoveryConfig(K=8, basis_C=inst["basis"], max_iters=20))
            errs.append(np.linalg.norm(rec.C - inst["C"]) / np.linalg.norm(inst["C"]))
        means.append(np.mean(errs))
    assert all(b >= a for a, b in zip(means, means[1:])), means


def test_mean_term_recovers_static_background():
    h = w = 16
    N, T, d = 256, 40, 2
    rng = np.random.default_rng(6)
    B, Bmu = SparsifyingBasis("dct2d", h, w), SparsifyingBasis("haar2d", h, w)
    S = np.zeros((N, d))
    S[[3, 17, 40, 66]] = rng.standard_normal((4, d))
    m = np.zeros(N)
    m[[0, 1, 5]] = [8.0, -2.0, 1.5]
    C, mu = B.synthesize(S.T).T, Bmu.synthesize(m)
    X = rng.standard_normal((d, T))
    video = VideoTensor(C @ X + mu[:, None], h, w)
    stream = acquire(video, MeasurementPlan(N, T, 4, 10, ensemble_seed=2))
    rec = recover_observation(stream, X, RecoveryConfig(K=4, K_mu=3, basis_C=B, basis_mu=Bmu))
    np.testing.assert_allclose(rec.mu, mu, atol=1e-6)
    np.testing.assert_allclose(rec.C, C, atol=1e-6)
    np.testing.assert_array_equal(rec.mu_support, [0, 1, 5])


def test_reconstruct_video_examples():
    N = 6
    C = np.eye(N)[:, :2]
    model = RecoveredModel(C, np.zeros(N), np.array([0, 1]), np.zeros(0), [], True)
    X = np.tile(np.array([[1.0], [0.0]]), 3)
    v = reconstruct_video(model, X, 3, 2)
    np.testing.assert_array_equal(v.Y, np.tile(C[:, :1], 3))
    m = np.arange(N, dtype=float)
    static = RecoveredModel(np.zeros((N, 2)), m, np.zeros(0), np.zeros(0), [], True)
    v = reconstruct_video(static, X, 3, 2)
    np.testing.assert_array_equal(v.Y, np.tile(m[:, None], 3))
    with pytest.raises(DimensionError):
        reconstruct_video(model, np.ones((3, 3)), 3, 2)
