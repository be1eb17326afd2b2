"""Seeded Monte-Carlo trials of the full compressive pipeline.

A trial draws a scene, measures it, estimates the states (completing the
Hankel matrix when common measurements are missing), optionally recovers
the observation matrix, and reports one row of metrics.  Everything random
is derived from the trial seed, so rows are reproducible one by one.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from .acquisition import (MeasurementPlan, acquire, missing_pattern, noise_std_for_input_snr,
                          pattern_input_snr)
from .errors import ConfigError
from .evaluation import SubspaceDescriptor, distance_matrix, nn_classify, snr_db, state_snr
from .lds import LdsModel, estimate_transition, fit_oracle, synthesize
from .recovery import RecoveryConfig, reconstruct_video, recover_observation
from .scenes import KINDS, SceneSpec, generate_scene, random_system
from .state_estim import build_hankel, complete_hankel, estimate_states, hankel
from .transforms import SparsifyingBasis

CSV_COLUMNS = ("trial", "seed", "N", "T", "d", "q", "K", "M_common", "M_innov", "missing_frac",
               "noise_std", "input_snr_db", "state_snr_db", "video_snr_db", "wall_ms")
EXTRA_COLUMNS = ("trial", "seed", "completion_snr_db", "completion_iterations", "oracle_snr_db",
                 "baseline_snr_db", "compression_ratio", "cosamp_iterations", "converged")


@dataclass
class TrialConfig:
    """Parameters of one pipeline run.

    `scene` is a texture kind or ``"random_lds"`` (Gaussian ``C`` on ``N``
    pixels).  Set `input_snr_db` to derive the noise level from the video,
    otherwise `noise_std` is used as given.  ``K = 0`` skips recovery of
    ``C`` and reports only the state metrics.
    """

    scene: str = "random_lds"
    N: int = 256
    h: int = 16
    w: int = 16
    d: int = 10
    T: int = 500
    q: int = 0
    K: int = 0
    K_mu: int = 0
    M_common: int = 1
    M_innov: int = 0
    noise_std: float = 0.0
    input_snr_db: float = math.inf
    missing_frac: float = 0.0
    missing_kind: str = "random"
    basis: str = "dct2d"
    basis_mu: str = "haar2d"
    remove_mean: bool = False
    spatial_smoothness: float = 0.1
    r_noise_std: float = 0.0
    q_noise_std: float = 0.0
    max_iters: int = 50
    tol: float = 1e-6
    ls_iters: int = 200
    ls_tol: float = 1e-10
    grouping: str = "row_group"
    oracle: bool = False

    def __post_init__(self):
        if self.scene != "random_lds" and self.scene not in KINDS:
            raise ConfigError(f"unknown scene {self.scene!r}")
        if self.scene != "random_lds":
            self.N = self.h * self.w

    @property
    def depth(self):
        """Hankel depth; 0 selects the default ``q = d``."""
        return self.q if self.q > 0 else self.d


def make_scene(cfg, seed):
    """``(video, model, states)`` for a trial."""
    if cfg.scene == "random_lds":
        model, x1 = random_system(cfg.N, cfg.d, seed)
        model.q_noise_std, model.r_noise_std = cfg.q_noise_std, cfg.r_noise_std
        video, states = synthesize(model, x1, cfg.T, seed)
        return video, model, states
    spec = SceneSpec(cfg.scene, cfg.h, cfg.w, cfg.d, spatial_smoothness=cfg.spatial_smoothness,
                     seed=seed, q_noise_std=cfg.q_noise_std, r_noise_std=cfg.r_noise_std)
    return generate_scene(spec, cfg.T)


def recovery_config(cfg, h, w):
    if cfg.K <= 0:
        return None
    return RecoveryConfig(K=cfg.K, K_mu=cfg.K_mu, basis_C=SparsifyingBasis(cfg.basis, h, w),
                          basis_mu=SparsifyingBasis(cfg.basis_mu, h, w) if cfg.K_mu else None,
                          max_iters=cfg.max_iters, tol=cfg.tol, ls_iters=cfg.ls_iters,
                          ls_tol=cfg.ls_tol, grouping=cfg.grouping)


def estimate_from_stream(stream, d, q, remove_mean=False):
    """States from a stream, completing missing frames first.

    Returns ``(StateEstimate, completed HankelMatrix)``.
    """
    H = build_hankel(stream.common_matrix(), q)
    if not H.complete:
        H = complete_hankel(H, rank_hint=d)
    return estimate_states(H, d, remove_mean=remove_mean), H


def run_trial(cfg, seed, trial=0):
    """Run one trial and return ``(row, extras)`` dicts."""
    t0 = time.perf_counter()
    video, model, truth = make_scene(cfg, seed)
    q = cfg.depth
    noise_std = cfg.noise_std
    if not math.isinf(cfg.input_snr_db):
        noise_std = noise_std_for_input_snr(video, cfg.input_snr_db)
    missing = missing_pattern(cfg.T, cfg.missing_frac, cfg.missing_kind, seed) if cfg.missing_frac else ()
    plan = MeasurementPlan(video.N, cfg.T, cfg.M_common, cfg.M_innov, noise_std, seed, missing)
    stream = acquire(video, plan, noise_seed=seed)
    est, H = estimate_from_stream(stream, cfg.d, q, cfg.remove_mean)

    extras = {"trial": trial, "seed": seed, "compression_ratio": plan.compression_ratio}
    if missing:
        clean = stream.ensemble().common.apply(video.Y)
        extras["completion_snr_db"] = snr_db(hankel(clean, q), H.H)
        extras["completion_iterations"] = H.info.get("iterations")

    n_est = est.X.shape[1]
    row = {"trial": trial, "seed": seed, "N": video.N, "T": cfg.T, "d": cfg.d, "q": q, "K": cfg.K,
           "M_common": cfg.M_common, "M_innov": cfg.M_innov, "missing_frac": cfg.missing_frac,
           "noise_std": noise_std, "input_snr_db": pattern_input_snr(video, noise_std),
           "state_snr_db": state_snr(est.X, truth.X[:, :n_est]), "video_snr_db": math.nan}

    rcfg = recovery_config(cfg, video.h, video.w)
    if rcfg is not None:
        rec = recover_observation(stream, est, rcfg)
        Yhat = reconstruct_video(rec, est, video.h, video.w, cfg.T)
        row["video_snr_db"] = snr_db(video.Y, Yhat.Y)
        extras["cosamp_iterations"] = rec.iterations
        extras["converged"] = rec.converged
    if cfg.oracle:
        om, ox = fit_oracle(video, cfg.d, subtract_mean=cfg.remove_mean or cfg.K_mu > 0)
        extras["oracle_snr_db"] = snr_db(video.Y, om.C @ ox.X + om.mu[:, None])
        mean = np.repeat(video.Y.mean(axis=1, keepdims=True), cfg.T, axis=1)
        extras["baseline_snr_db"] = snr_db(video.Y, mean)
    row["wall_ms"] = 1000.0 * (time.perf_counter() - t0)
    return row, extras


def run_trials(cfg, n_trials, seed, threads=1, first_trial=0):
    """`n_trials` trials with seeds ``seed, seed + 1, ...``, in trial order."""
    jobs = [(cfg, seed + i, first_trial + i) for i in range(n_trials)]
    if threads <= 1:
        return [run_trial(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: run_trial(*job), jobs))


def sweep(cfg, variable, values, n_trials, seed, threads=1):
    """Monte-Carlo runs at every value of one `TrialConfig` field.

    Every sweep point reuses the same trial seeds, so the points are paired.
    """
    names = {f.name for f in fields(TrialConfig)}
    if variable not in names:
        raise ConfigError(f"cannot sweep over unknown parameter {variable!r}")
    rows, extras = [], []
    for k, value in enumerate(values):
        point = replace(cfg, **{variable: value})
        for r, e in run_trials(point, n_trials, seed, threads, first_trial=k * n_trials):
            rows.append(r)
            extras.append(e)
    return rows, extras


def aggregate(rows, by, metrics=("state_snr_db", "video_snr_db")):
    """Mean and minimum of each metric per distinct value of column `by`."""
    groups = {}
    for r in rows:
        groups.setdefault(r[by], []).append(r)
    out = []
    for value in sorted(groups):
        g = groups[value]
        entry = {by: value, "n_trials": len(g)}
        for m in metrics:
            vals = np.array([r.get(m, math.nan) for r in g], dtype=float)
            entry[f"mean_{m}"] = float(np.mean(vals)) if vals.size else math.nan
            entry[f"min_{m}"] = float(np.min(vals)) if vals.size else math.nan
        out.append(entry)
    return out


def jitter_model(model, rel, rng, basis=None):
    """Copy of `model` with relative perturbations of size `rel`.

    ``C`` is perturbed entrywise in the coefficient domain of `basis` (so a
    sparse ``C`` stays sparse) and ``A`` by a Gaussian matrix scaled to
    ``rel * ||A||_F``, shrunk back onto the unit disc if it became unstable.
    """
    if basis is not None:
        S = basis.analyze(model.C.T).T
        C = basis.synthesize((S * (1 + rel * rng.standard_normal(S.shape))).T).T
    else:
        C = model.C * (1 + rel * rng.standard_normal(model.C.shape))
    d = model.d
    G = rng.standard_normal((d, d))
    A = model.A + rel * np.linalg.norm(model.A) * G / np.linalg.norm(G)
    rho = np.max(np.abs(np.linalg.eigvals(A)))
    if rho > 1:
        A = A / rho
    return LdsModel(C, A, model.mu, model.q_noise_std, model.r_noise_std, model.h, model.w)


def estimate_lds(video, cfg, seed):
    """CS-LDS estimate ``(C, A)`` of a video measured with the plan in `cfg`."""
    noise_std = cfg.noise_std
    if not math.isinf(cfg.input_snr_db):
        noise_std = noise_std_for_input_snr(video, cfg.input_snr_db)
    plan = MeasurementPlan(video.N, video.T, cfg.M_common, cfg.M_innov, noise_std, seed)
    stream = acquire(video, plan, noise_seed=seed)
    est, _ = estimate_from_stream(stream, cfg.d, cfg.depth, cfg.remove_mean)
    rec = recover_observation(stream, est, recovery_config(cfg, video.h, video.w))
    return LdsModel(rec.C, estimate_transition(est.X), h=video.h, w=video.w, check_rank=False)


def classification_experiment(cfg, n_classes=2, n_train=10, n_test=10, jitter=0.01, seed=0, threads=1):
    """Nearest-neighbour classification of CS-LDS estimates of jittered models.

    Each class is one scene model drawn from `cfg`; every sample jitters it
    by `jitter`, renders ``cfg.T`` frames, measures them and re-estimates
    ``(C, A)`` from the measurements.  With ``cfg.K = 0`` the model is fit
    from the frames directly instead.
    """
    bases = [make_scene(cfg, seed + 7919 * (c + 1))[1] for c in range(n_classes)]
    basis = SparsifyingBasis(cfg.basis, cfg.h, cfg.w) if cfg.scene != "random_lds" else None
    jobs = []
    for c in range(n_classes):
        for i in range(n_train + n_test):
            jobs.append((c, i < n_train, seed + 100003 * (c + 1) + i))

    def run(job):
        c, _, s = job
        rng = np.random.default_rng(s)
        model = jitter_model(bases[c], jitter, rng, basis)
        x1 = rng.standard_normal(model.d)
        video, _ = synthesize(model, x1 / np.linalg.norm(x1), cfg.T, s)
        if cfg.K > 0:
            return estimate_lds(video, cfg, s)
        m, _ = fit_oracle(video, cfg.d, subtract_mean=False)
        return m

    if threads <= 1:
        models = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            models = list(pool.map(run, jobs))
    descs = [SubspaceDescriptor.from_model(m.C, m.A) for m in models]
    train = [(descs[k], jobs[k][0]) for k in range(len(jobs)) if jobs[k][1]]
    test = [k for k in range(len(jobs)) if not jobs[k][1]]
    predicted = [nn_classify(train, descs[k]) for k in test]
    true = [jobs[k][0] for k in test]
    D = distance_matrix([descs[k] for k in test], [d for d, _ in train])
    accuracy = float(np.mean(np.array(predicted) == np.array(true)))
    return {"true": true, "predicted": predicted, "accuracy": accuracy, "distances": D}
