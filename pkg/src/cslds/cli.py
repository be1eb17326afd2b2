"""``cslds`` command-line interface.

Usage::

    cslds generate|acquire|recover|evaluate|classify|sweep --config <path> [--out <dir>] [--threads <n>]

The config is a flat ``key = value`` file.  ``seed`` is mandatory; every
other seed defaults to it.  Exit codes: 1 config error, 2 I/O or format
error, 3 numerical or dimension failure.
"""

import argparse
import math
import os
import sys
import time
from dataclasses import fields

import numpy as np

from . import io
from .acquisition import (MeasurementPlan, acquire, missing_pattern, noise_std_for_input_snr,
                          pattern_input_snr)
from .errors import ConfigError, CSLDSError, FormatError
from .evaluation import confusion_matrix, snr_db, state_snr
from .experiments import (CSV_COLUMNS, EXTRA_COLUMNS, TrialConfig, aggregate, classification_experiment,
                          estimate_from_stream, make_scene, recovery_config, run_trials, sweep)
from .lds import StateSequence
from .recovery import reconstruct_video, recover_observation

COMMANDS = ("generate", "acquire", "recover", "evaluate", "classify", "sweep")
_TRIAL_FIELDS = {f.name: f for f in fields(TrialConfig)}
_RUN_KEYS = {
    "seed": int, "scene_seed": int, "ensemble_seed": int, "noise_seed": int, "missing_seed": int,
    "mode": str, "n_trials": int, "sweep_variable": str, "sweep_values": str,
    "input": str, "stream": str, "truth": str, "out": str, "threads": int, "bits": int,
    "n_classes": int, "n_train": int, "n_test": int, "jitter": float,
}


def _convert(name, raw, kind):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(raw)
            return low in ("1", "true", "yes", "on")
        if kind is float:
            return float(raw)
        if kind is int:
            return int(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"config key {name!r}: cannot parse {raw!r} as {kind.__name__}") from exc


def _field_type(f):
    t = f.type
    if isinstance(t, str):
        t = {"int": int, "float": float, "bool": bool, "str": str}[t]
    return t


class RunConfig:
    """Parsed configuration: ``trial`` holds the pipeline parameters."""

    def __init__(self, raw, base_dir="."):
        trial_kwargs, run = {}, {}
        for key, value in raw.items():
            if key in _TRIAL_FIELDS:
                trial_kwargs[key] = _convert(key, value, _field_type(_TRIAL_FIELDS[key]))
            elif key in _RUN_KEYS:
                run[key] = _convert(key, value, _RUN_KEYS[key])
            else:
                raise ConfigError(f"unknown config key {key!r}")
        if "seed" not in run:
            raise ConfigError("config must set 'seed'")
        self.trial = TrialConfig(**trial_kwargs)
        self.run = run
        self.base_dir = base_dir

    def get(self, key, default=None):
        return self.run.get(key, default)

    def seed_for(self, key):
        return self.run.get(key, self.run["seed"])

    def path(self, key, default):
        p = self.run.get(key)
        if p is None:
            return default
        return p if os.path.isabs(p) else os.path.join(self.base_dir, p)


def load_config(path):
    return RunConfig(io.read_config(path), os.path.dirname(os.path.abspath(path)))


def _require(path, what):
    if not os.path.exists(path):
        raise FormatError(f"missing {what}: {path}")
    return path


def _read_video(path):
    if os.path.isdir(path):
        return io.read_video_pgm(path)
    return io.video_from_entries(io.read_container(_require(path, "input video")))


def cmd_generate(cfg, out, threads=1):
    t = cfg.trial
    video, model, states = make_scene(t, cfg.seed_for("scene_seed"))
    io.write_container(os.path.join(out, "video.csld"), io.video_entries(video))
    io.write_container(os.path.join(out, "model.csld"), io.model_entries(model))
    io.write_container(os.path.join(out, "states.csld"), {"type": "states", "X": states.X})
    io.write_video_pgm(os.path.join(out, "frames"), video, bits=cfg.get("bits", 16))
    return 0


def cmd_acquire(cfg, out, threads=1):
    t = cfg.trial
    video = _read_video(cfg.path("input", os.path.join(out, "video.csld")))
    noise_std = t.noise_std
    if not math.isinf(t.input_snr_db):
        noise_std = noise_std_for_input_snr(video, t.input_snr_db)
    missing = ()
    if t.missing_frac:
        missing = missing_pattern(video.T, t.missing_frac, t.missing_kind, cfg.seed_for("missing_seed"))
    plan = MeasurementPlan(video.N, video.T, t.M_common, t.M_innov, noise_std, cfg.seed_for("ensemble_seed"), missing)
    stream = acquire(video, plan, noise_seed=cfg.seed_for("noise_seed"))
    io.write_stream(os.path.join(out, "stream.csld"), stream)
    io.write_kv(os.path.join(out, "acquire.txt"), {
        "N": plan.N, "T": plan.T, "M_common": plan.M_common, "M_innov": plan.M_innov,
        "noise_std": noise_std, "input_snr_db": pattern_input_snr(video, noise_std),
        "missing_kind": t.missing_kind, "missing_frac": t.missing_frac,
        "compression_ratio": plan.compression_ratio})
    return 0


def _frame_shape(cfg, out, N):
    vid = cfg.path("input", os.path.join(out, "video.csld"))
    if os.path.isfile(vid):
        e = io.read_container(vid)
        return int(e["h"]), int(e["w"])
    t = cfg.trial
    if t.scene != "random_lds" and t.h * t.w == N:
        return t.h, t.w
    return N, 1


def cmd_recover(cfg, out, threads=1):
    t = cfg.trial
    stream = io.read_stream(_require(cfg.path("stream", os.path.join(out, "stream.csld")), "stream file"))
    t0 = time.perf_counter()
    est, H = estimate_from_stream(stream, t.d, t.depth, t.remove_mean)
    h, w = _frame_shape(cfg, out, stream.plan.N)
    X = est.full_states(stream.T)
    entries = {"type": "recovery", "X": X, "X_hankel": est.X, "singular_values": est.singular_values,
               "q": est.q, "d": t.d, "h": h, "w": w}
    io.write_csv(os.path.join(out, "spectrum.csv"),
                 [{"index": i, "singular_value": s} for i, s in enumerate(est.singular_values)])
    rcfg = recovery_config(t, h, w)
    if rcfg is not None:
        rec = recover_observation(stream, est, rcfg)
        video = reconstruct_video(rec, est, h, w, stream.T)
        entries.update({"C": rec.C, "mu": rec.mu, "support": rec.support,
                        "residual_history": np.asarray(rec.residual_history),
                        "converged": int(rec.converged), "iterations": rec.iterations})
        io.write_container(os.path.join(out, "reconstruction.csld"), io.video_entries(video))
        io.write_csv(os.path.join(out, "residuals.csv"),
                     [{"iteration": i + 1, "residual": r} for i, r in enumerate(rec.residual_history)])
    entries["wall_ms"] = 1000.0 * (time.perf_counter() - t0)
    io.write_container(os.path.join(out, "recovered.csld"), entries)
    return 0


def cmd_evaluate(cfg, out, threads=1):
    t = cfg.trial
    truth = _read_video(cfg.path("input", os.path.join(out, "video.csld")))
    rec = io.read_container(_require(os.path.join(out, "recovered.csld"), "recovery result"))
    stream = io.read_stream(_require(cfg.path("stream", os.path.join(out, "stream.csld")), "stream file"))
    plan = stream.plan
    row = {"trial": 0, "seed": cfg.run["seed"], "N": plan.N, "T": plan.T, "d": int(rec["d"]),
           "q": int(rec["q"]), "K": t.K, "M_common": plan.M_common, "M_innov": plan.M_innov,
           "missing_frac": len(plan.missing) / plan.T, "noise_std": plan.noise_std,
           "input_snr_db": pattern_input_snr(truth, plan.noise_std), "state_snr_db": math.nan,
           "video_snr_db": math.nan, "wall_ms": float(rec["wall_ms"])}
    states_path = cfg.path("truth", os.path.join(out, "states.csld"))
    if os.path.isfile(states_path):
        X_true = StateSequence(io.read_container(states_path)["X"]).X
        n = rec["X_hankel"].shape[1]
        if X_true.shape[0] == rec["X_hankel"].shape[0] and X_true.shape[1] >= n:
            row["state_snr_db"] = state_snr(rec["X_hankel"], X_true[:, :n])
    recon_path = os.path.join(out, "reconstruction.csld")
    if os.path.isfile(recon_path):
        row["video_snr_db"] = snr_db(truth.Y, io.video_from_entries(io.read_container(recon_path)).Y)
    io.write_csv(os.path.join(out, "metrics.csv"), [row], CSV_COLUMNS)
    io.write_kv(os.path.join(out, "metrics.txt"), row)
    return 0


def cmd_classify(cfg, out, threads=1):
    result = classification_experiment(cfg.trial, n_classes=cfg.get("n_classes", 2),
                                       n_train=cfg.get("n_train", 10), n_test=cfg.get("n_test", 10),
                                       jitter=cfg.get("jitter", 0.01), seed=cfg.run["seed"], threads=threads)
    labels = list(range(cfg.get("n_classes", 2)))
    M, _ = confusion_matrix(result["true"], result["predicted"], labels)
    io.write_matrix_csv(os.path.join(out, "confusion.csv"), M, labels)
    io.write_matrix_csv(os.path.join(out, "distances.csv"), result["distances"])
    io.write_kv(os.path.join(out, "classify.txt"), {"accuracy": result["accuracy"],
                                                     "n_test": len(result["true"])})
    return 0


def cmd_sweep(cfg, out, threads=1):
    mode = cfg.get("mode", "sweep")
    seed = cfg.run["seed"]
    if mode == "single":
        results = run_trials(cfg.trial, 1, seed, threads)
        variable = None
    elif mode == "monte_carlo":
        results = run_trials(cfg.trial, cfg.get("n_trials", 1), seed, threads)
        variable = None
    elif mode == "sweep":
        variable = cfg.get("sweep_variable")
        raw_values = cfg.get("sweep_values")
        if not variable or not raw_values:
            raise ConfigError("sweep mode needs sweep_variable and sweep_values")
        if variable not in _TRIAL_FIELDS:
            raise ConfigError(f"cannot sweep over unknown parameter {variable!r}")
        kind = _field_type(_TRIAL_FIELDS[variable])
        values = [_convert(variable, v, kind) for v in raw_values.split(",") if v.strip()]
        rows, extras = sweep(cfg.trial, variable, values, cfg.get("n_trials", 1), seed, threads)
        results = list(zip(rows, extras))
    else:
        raise ConfigError(f"unknown mode {mode!r}")
    rows = [r for r, _ in results]
    extras = [e for _, e in results]
    io.write_csv(os.path.join(out, "sweep.csv"), rows, CSV_COLUMNS)
    io.write_csv(os.path.join(out, "diagnostics.csv"), extras, EXTRA_COLUMNS)
    io.write_csv(os.path.join(out, "summary.csv"), aggregate(rows, variable or "d"))
    return 0


HANDLERS = {"generate": cmd_generate, "acquire": cmd_acquire, "recover": cmd_recover,
            "evaluate": cmd_evaluate, "classify": cmd_classify, "sweep": cmd_sweep}


def _threads(arg):
    if arg is not None:
        return arg
    env = os.environ.get("CSLDS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"CSLDS_THREADS must be an integer, got {env!r}") from exc
    return 1


def build_parser():
    p = argparse.ArgumentParser(prog="cslds", description="Compressive acquisition and recovery of LDS videos.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="key = value run configuration")
    p.add_argument("--out", help="output directory (default: 'out' key or the current directory)")
    p.add_argument("--threads", type=int, help="worker threads (default: $CSLDS_THREADS or 1)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = args.out or cfg.path("out", ".")
        os.makedirs(out, exist_ok=True)
        threads = _threads(args.threads)
        return HANDLERS[args.command](cfg, out, threads)
    except ConfigError as exc:
        print(f"cslds: config error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FormatError as exc:
        print(f"cslds: I/O error: {exc}", file=sys.stderr)
        return exc.exit_code
    except CSLDSError as exc:
        print(f"cslds: numerical error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"cslds: I/O error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"cslds: config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
