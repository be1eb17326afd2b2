import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cslds import io
from cslds.acquisition import MeasurementPlan, acquire
from cslds.errors import ConfigError, FormatError
from cslds.lds import LdsModel, VideoTensor


def stream_fixture(rng, missing=(1, 3), noise=0.05):
    v = VideoTensor(rng.standard_normal((20, 5)), 4, 5)
    return acquire(v, MeasurementPlan(20, 5, 3, 4, noise, 7, missing), noise_seed=11)


def test_stream_round_trip(tmp_path, rng):
    s = stream_fixture(rng)
    path = tmp_path / "s.csld"
    io.write_stream(path, s)
    back = io.read_stream(path)
    assert back.plan == s.plan and back.noise_seed == 11
    np.testing.assert_array_equal(back.common_matrix(), s.common_matrix())
    np.testing.assert_array_equal(back.innovation_matrix(), s.innovation_matrix())
    assert path.read_bytes() == io.encode_stream(back)


def test_stream_layout(rng):
    s = stream_fixture(rng)
    data = io.encode_stream(s)
    assert data[:4] == b"CSLD"
    assert struct.unpack("<H", data[4:6])[0] == 1
    assert struct.unpack("<6Q", data[6:54]) == (20, 5, 3, 4, 7, 11)
    assert struct.unpack("<I", data[54:58])[0] == 2
    assert struct.unpack("<2I", data[58:66]) == (1, 3)
    assert data[66] == 1
    np.testing.assert_array_equal(np.frombuffer(data[67:67 + 24], "<f8"), s.common[0])
    assert data[-12:-8] == b"NSTD" and struct.unpack("<d", data[-8:])[0] == 0.05
    # frames 0, 2, 4 carry 7 values, frames 1, 3 carry 4
    assert len(data) == 66 + 5 + 8 * (3 * 7 + 2 * 4) + 12


def test_stream_without_trailer(rng):
    s = stream_fixture(rng, noise=0.0)
    back = io.decode_stream(io.encode_stream(s)[:-12])
    assert back.plan.noise_std == 0.0


def test_stream_corruption(rng):
    data = io.encode_stream(stream_fixture(rng))
    with pytest.raises(FormatError):
        io.decode_stream(b"XXXX" + data[4:])
    with pytest.raises(FormatError):
        io.decode_stream(data[:100])
    with pytest.raises(FormatError):
        io.decode_stream(data + b"\x00")
    bad = bytearray(data)
    bad[66] = 0
    with pytest.raises(FormatError):
        io.decode_stream(bytes(bad))
    with pytest.raises(FormatError):
        io.read_stream("/nonexistent/stream.csld")


def test_container_round_trip(tmp_path, rng):
    entries = {"type": "thing", "A": rng.standard_normal((3, 4)), "v": np.arange(5), "x": 2.5, "n": 7,
               "empty": np.zeros((0, 3)), "cube": rng.standard_normal((2, 2, 2))}
    path = tmp_path / "c.csld"
    io.write_container(path, entries)
    back = io.read_container(path)
    assert back["type"] == "thing" and back["n"] == 7 and back["x"] == 2.5
    for k in ("A", "v", "empty", "cube"):
        np.testing.assert_array_equal(back[k], entries[k])
        assert back[k].shape == np.shape(entries[k])
    assert io.encode_container(back) == path.read_bytes()
    assert io.csld_version(path) == 2
    with pytest.raises(FormatError):
        io.decode_stream(path.read_bytes())
    with pytest.raises(FormatError):
        io.decode_container(io.encode_stream(stream_fixture(rng)))


@settings(max_examples=30, deadline=None)
@given(vals=st.lists(st.floats(allow_nan=False), min_size=0, max_size=12))
def test_container_is_bit_exact(vals):
    a = np.array(vals, dtype=np.float64)
    back = io.decode_container(io.encode_container({"a": a}))["a"]
    assert back.tobytes() == a.tobytes()


def test_model_and_video_round_trip(rng):
    m = LdsModel(rng.standard_normal((6, 2)), rng.standard_normal((2, 2)), rng.standard_normal(6), 0.1, 0.2, 3, 2)
    back = io.model_from_entries(io.decode_container(io.encode_container(io.model_entries(m))))
    for f in ("C", "A", "mu"):
        np.testing.assert_array_equal(getattr(back, f), getattr(m, f))
    assert (back.q_noise_std, back.r_noise_std, back.h, back.w) == (0.1, 0.2, 3, 2)
    v = VideoTensor(rng.standard_normal((6, 4)), 2, 3)
    back = io.video_from_entries(io.decode_container(io.encode_container(io.video_entries(v))))
    np.testing.assert_array_equal(back.Y, v.Y)
    with pytest.raises(FormatError):
        io.model_from_entries(io.video_entries(v))


@pytest.mark.parametrize("maxval", [255, 65535, 1000])
def test_pgm_round_trip(tmp_path, rng, maxval):
    img = rng.integers(0, maxval + 1, size=(7, 5))
    io.write_pgm(tmp_path / "f.pgm", img, maxval)
    back, mv = io.read_pgm(tmp_path / "f.pgm")
    assert mv == maxval
    np.testing.assert_array_equal(back, img)


def test_pgm_header_with_comment(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n2 1\n255\n\x01\x02")
    img, mv = io.read_pgm(tmp_path / "c.pgm")
    np.testing.assert_array_equal(img, [[1, 2]])
    (tmp_path / "bad.pgm").write_bytes(b"P2\n2 1\n255\n1 2")
    with pytest.raises(FormatError):
        io.read_pgm(tmp_path / "bad.pgm")
    with pytest.raises(ValueError):
        io.write_pgm(tmp_path / "x.pgm", np.array([[300]]), 255)


def test_video_pgm_sequence(tmp_path, rng):
    Y = rng.integers(0, 65536, size=(12, 4)).astype(float)
    Y[0, 0], Y[1, 0] = 0, 65535
    v = VideoTensor(Y, 4, 3)
    lo, hi = io.write_video_pgm(tmp_path / "frames", v)
    assert (lo, hi) == (0.0, 65535.0)
    assert sorted(p.name for p in (tmp_path / "frames").glob("*.pgm"))[0] == "frame_00000.pgm"
    back = io.read_video_pgm(tmp_path / "frames")
    np.testing.assert_array_equal(back.Y, Y)
    w = VideoTensor(rng.standard_normal((12, 3)), 3, 4)
    io.write_video_pgm(tmp_path / "g", w, bits=8)
    assert np.abs(io.read_video_pgm(tmp_path / "g").Y - w.Y).max() <= (w.Y.max() - w.Y.min()) / 255
    with pytest.raises(FormatError):
        io.read_video_pgm(tmp_path / "empty_dir_that_does_not_exist")


def test_csv_round_trip(tmp_path, rng):
    rows = [{"trial": i, "x": float(v), "s": "abc", "inf": math.inf, "nan": math.nan}
            for i, v in enumerate(rng.standard_normal(5) * 10.0 ** rng.integers(-20, 20, 5))]
    rows[0]["x"] = 0.1 + 0.2
    io.write_csv(tmp_path / "r.csv", rows)
    back = io.read_csv(tmp_path / "r.csv")
    for r, b in zip(rows, back):
        assert b["trial"] == r["trial"] and b["x"] == r["x"] and b["s"] == "abc"
        assert b["inf"] == math.inf and math.isnan(b["nan"])
    assert "inf" in (tmp_path / "r.csv").read_text()


@settings(max_examples=50, deadline=None)
@given(x=st.floats(allow_nan=False))
def test_float_format_is_value_exact(x):
    assert float(io.format_value(x)) == x


def test_config_parsing(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nseed = 4\nscene = blinking_blobs   # trailing\n\nK=30\n")
    assert io.read_config(p) == {"seed": "4", "scene": "blinking_blobs", "K": "30"}
    p.write_text("seed 4\n")
    with pytest.raises(ConfigError):
        io.read_config(p)
    with pytest.raises(FormatError):
        io.read_config(tmp_path / "missing.cfg")
