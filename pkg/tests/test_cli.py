import math
import os

import numpy as np
import pytest

from cslds import cli, io

BASE = """seed = 3
scene = blinking_blobs
h = 16
w = 16
d = 6
T = 80
M_common = 18
M_innov = 120
q = 2
K = 80
spatial_smoothness = 0.2
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(cmd, cfg, out, *extra):
    return cli.main([cmd, "--config", cfg, "--out", str(out), *extra])


def test_full_pipeline(tmp_path):
    cfg = write_cfg(tmp_path, BASE)
    out = tmp_path / "o"
    for cmd in ("generate", "acquire", "recover", "evaluate"):
        assert run(cmd, cfg, out) == 0, cmd
    for f in ("video.csld", "model.csld", "states.csld", "frames/frame_00079.pgm", "stream.csld",
              "recovered.csld", "reconstruction.csld", "residuals.csv", "spectrum.csv", "metrics.csv"):
        assert (out / f).exists(), f
    (row,) = io.read_csv(out / "metrics.csv")
    assert list(row) == list(cli.CSV_COLUMNS)
    assert row["video_snr_db"] >= 40
    assert row["state_snr_db"] > 100
    assert row["input_snr_db"] == math.inf


def test_acquire_is_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, BASE + "input_snr_db = 30\nmissing_frac = 0.25\n")
    out = tmp_path / "o"
    assert run("generate", cfg, out) == 0
    assert run("acquire", cfg, out) == 0
    first = (out / "stream.csld").read_bytes()
    assert run("acquire", cfg, out) == 0
    assert (out / "stream.csld").read_bytes() == first
    s = io.read_stream(out / "stream.csld")
    assert len(s.plan.missing) == 20 and s.plan.noise_std > 0


def test_recover_with_missing_frames(tmp_path):
    cfg = write_cfg(tmp_path, BASE.replace("q = 2", "q = 10") + "missing_frac = 0.3\n")
    out = tmp_path / "o"
    for cmd in ("generate", "acquire", "recover", "evaluate"):
        assert run(cmd, cfg, out) == 0, cmd
    (row,) = io.read_csv(out / "metrics.csv")
    assert row["missing_frac"] == pytest.approx(0.3)
    assert row["video_snr_db"] > 20


def test_sweep_csv(tmp_path):
    cfg = write_cfg(tmp_path, "seed = 1\nscene = random_lds\nN = 64\nd = 4\nT = 60\nq = 10\n"
                              "input_snr_db = 40\nmode = sweep\nsweep_variable = M_common\n"
                              "sweep_values = 1, 2, 4\nn_trials = 3\n")
    out = tmp_path / "o"
    assert run("sweep", cfg, out, "--threads", "2") == 0
    rows = io.read_csv(out / "sweep.csv")
    assert len(rows) == 9 and list(rows[0]) == list(cli.CSV_COLUMNS)
    assert [r["trial"] for r in rows] == list(range(9))
    assert [r["M_common"] for r in rows] == [1] * 3 + [2] * 3 + [4] * 3
    summary = io.read_csv(out / "summary.csv")
    assert [s["M_common"] for s in summary] == [1, 2, 4]
    first = (out / "sweep.csv").read_text()
    assert run("sweep", cfg, tmp_path / "o2") == 0
    strip = lambda text: [line.rsplit(",", 1)[0] for line in text.splitlines()]   # drop wall_ms
    assert strip((tmp_path / "o2" / "sweep.csv").read_text()) == strip(first)


def test_monte_carlo_mode(tmp_path, monkeypatch):
    monkeypatch.setenv("CSLDS_THREADS", "2")
    cfg = write_cfg(tmp_path, "seed = 5\nN = 32\nd = 2\nT = 30\nq = 4\nmode = monte_carlo\nn_trials = 4\n")
    assert run("sweep", cfg, tmp_path / "o") == 0
    assert len(io.read_csv(tmp_path / "o" / "sweep.csv")) == 4


def test_classify(tmp_path):
    cfg = write_cfg(tmp_path, "seed = 2\nscene = oscillating_modes\nh = 16\nw = 16\nd = 4\nT = 60\n"
                              "M_common = 4\nM_innov = 20\nq = 2\nK = 6\nn_train = 3\nn_test = 3\n")
    assert run("classify", cfg, tmp_path / "o") == 0
    conf = io.read_csv(tmp_path / "o" / "confusion.csv")
    assert [[r["0"], r["1"]] for r in conf] == [[3, 0], [0, 3]]
    assert "accuracy = 1" in (tmp_path / "o" / "classify.txt").read_text()


def test_exit_codes(tmp_path, capsys):
    assert run("generate", write_cfg(tmp_path, "scene = blinking_blobs\n", "a.cfg"), tmp_path) == 1
    assert run("generate", write_cfg(tmp_path, "seed = 1\nbogus = 3\n", "b.cfg"), tmp_path) == 1
    assert run("generate", write_cfg(tmp_path, "seed = 1\nd = three\n", "c.cfg"), tmp_path) == 1
    assert run("generate", str(tmp_path / "nope.cfg"), tmp_path) == 2
    assert run("recover", write_cfg(tmp_path, BASE, "d.cfg"), tmp_path / "empty") == 2
    assert run("acquire", write_cfg(tmp_path, BASE + "input = missing.csld\n", "e.cfg"), tmp_path) == 2
    # d larger than the Hankel matrix allows
    cfg = write_cfg(tmp_path, "seed = 1\nN = 16\nd = 8\nT = 10\nq = 1\nM_common = 2\nmode = single\n", "f.cfg")
    assert run("sweep", cfg, tmp_path / "g") == 3
    err = capsys.readouterr().err
    assert "config error" in err and "I/O error" in err and "numerical error" in err


def test_bad_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("CSLDS_THREADS", "many")
    assert run("sweep", write_cfg(tmp_path, "seed = 1\nN = 16\nd = 2\nT = 10\nmode = single\n"), tmp_path) == 1


def test_pgm_input_directory(tmp_path):
    cfg = write_cfg(tmp_path, BASE)
    out = tmp_path / "o"
    assert run("generate", cfg, out) == 0
    cfg2 = write_cfg(tmp_path, BASE + f"input = {out / 'frames'}\n", "pgm.cfg")
    assert run("acquire", cfg2, tmp_path / "p") == 0
    assert io.read_stream(tmp_path / "p" / "stream.csld").plan.T == 80


def test_sweep_over_common_measurements(tmp_path):
    cfg = write_cfg(tmp_path, "seed = 100\nscene = random_lds\nd = 10\nT = 500\nq = 50\ninput_snr_db = 40\n"
                              "mode = sweep\nsweep_variable = M_common\nsweep_values = 1, 2, 4, 8, 16\n"
                              "n_trials = 20\n")
    assert run("sweep", cfg, tmp_path / "o") == 0
    rows = io.read_csv(tmp_path / "o" / "sweep.csv")
    assert len(rows) == 100
    values = [1, 2, 4, 8, 16]
    snr = np.array([[r["state_snr_db"] for r in rows if r["M_common"] == m] for m in values])
    mean = snr.mean(axis=1)
    se = snr.std(axis=1, ddof=1) / np.sqrt(20)
    for k in range(4):
        assert mean[k + 1] >= mean[k] - 2 * math.hypot(se[k], se[k + 1]), (mean, se)
    assert mean[-1] > mean[0]
