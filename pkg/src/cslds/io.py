"""File formats: CSLD binary containers, PGM frame sequences, CSV and config files.

All binary numbers are little-endian; floats are IEEE-754 f64.

CSLD version 1 holds a compressive stream::

    b"CSLD"  u16 version=1
    u64 N, T, M_common, M_innov, ensemble_seed, noise_seed
    u32 n_missing, u32 index * n_missing          (0-based frame indices)
    per frame: u8 has_common, f64 * M_common (if has_common), f64 * M_innov
    optional trailer: b"NSTD" f64 noise_std

CSLD version 2 is a keyed array container used for videos, models and
recovery results::

    b"CSLD"  u16 version=2  u32 n_entries
    per entry: u16 name_len, utf-8 name, u8 kind (0 f64, 1 i64, 2 utf-8 text),
               u8 ndim, u64 * ndim shape, raw payload
"""

import configparser
import csv
import math
import os
import struct

import numpy as np

from .acquisition import CompressiveStream, MeasurementPlan
from .errors import ConfigError, FormatError
from .lds import LdsModel, VideoTensor

MAGIC = b"CSLD"
STREAM_VERSION = 1
CONTAINER_VERSION = 2
_NOISE_TAG = b"NSTD"
_KINDS = {0: "<f8", 1: "<i8"}


class _Reader:
    def __init__(self, data, path):
        self.data, self.pos, self.path = data, 0, path

    def take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.path}: truncated file")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def f64(self, count):
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)

    @property
    def remaining(self):
        return len(self.data) - self.pos


def _read_bytes(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc


def _header(reader):
    if reader.take(4) != MAGIC:
        raise FormatError(f"{reader.path}: not a CSLD file")
    return reader.unpack("<H")[0]


def csld_version(path):
    return _header(_Reader(_read_bytes(path), path))


# --- stream files -----------------------------------------------------------

def encode_stream(stream):
    p = stream.plan
    parts = [MAGIC, struct.pack("<H", STREAM_VERSION),
             struct.pack("<6Q", p.N, p.T, p.M_common, p.M_innov, p.ensemble_seed, stream.noise_seed),
             struct.pack("<I", len(p.missing)), struct.pack(f"<{len(p.missing)}I", *p.missing)]
    for zc, zi in zip(stream.common, stream.innovation):
        parts.append(b"\x00" if zc is None else b"\x01")
        if zc is not None:
            parts.append(np.asarray(zc, dtype="<f8").tobytes())
        parts.append(np.asarray(zi, dtype="<f8").tobytes())
    parts.append(_NOISE_TAG + struct.pack("<d", p.noise_std))
    return b"".join(parts)


def decode_stream(data, path="<bytes>"):
    r = _Reader(data, path)
    version = _header(r)
    if version != STREAM_VERSION:
        raise FormatError(f"{path}: expected a stream file (version 1), found version {version}")
    N, T, Mc, Mi, ens_seed, noise_seed = r.unpack("<6Q")
    n_missing = r.unpack("<I")[0]
    missing = r.unpack(f"<{n_missing}I")
    missing_set = set(missing)
    common, innovation = [], []
    for t in range(T):
        flag = r.take(1)[0]
        if flag not in (0, 1):
            raise FormatError(f"{path}: bad frame flag {flag} at frame {t}")
        if bool(flag) == (t in missing_set):
            raise FormatError(f"{path}: frame {t} flag disagrees with the missing set")
        common.append(r.f64(Mc) if flag else None)
        innovation.append(r.f64(Mi))
    noise_std = 0.0
    if r.remaining:
        if r.remaining != 12 or r.take(4) != _NOISE_TAG:
            raise FormatError(f"{path}: unexpected trailing bytes")
        noise_std = r.unpack("<d")[0]
    try:
        plan = MeasurementPlan(N, T, Mc, Mi, noise_std, ens_seed, missing)
        return CompressiveStream(common, innovation, plan, noise_seed)
    except ValueError as exc:
        raise FormatError(f"{path}: inconsistent stream header: {exc}") from exc


def write_stream(path, stream):
    _write_bytes(path, encode_stream(stream))


def read_stream(path):
    return decode_stream(_read_bytes(path), path)


# --- keyed containers -------------------------------------------------------

def encode_container(entries):
    """Serialize a mapping of names to arrays, scalars or strings."""
    parts = [MAGIC, struct.pack("<HI", CONTAINER_VERSION, len(entries))]
    for name, value in entries.items():
        key = name.encode("utf-8")
        parts.append(struct.pack("<H", len(key)) + key)
        if isinstance(value, str):
            payload = value.encode("utf-8")
            parts.append(struct.pack("<BBQ", 2, 1, len(payload)) + payload)
            continue
        arr = np.asarray(value)
        if arr.dtype.kind in "biu":
            kind, arr = 1, arr.astype("<i8")
        elif arr.dtype.kind == "f":
            kind, arr = 0, arr.astype("<f8")
        else:
            raise TypeError(f"cannot store {name!r} of dtype {arr.dtype}")
        parts.append(struct.pack("<BB", kind, arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(parts)


def decode_container(data, path="<bytes>"):
    r = _Reader(data, path)
    version = _header(r)
    if version != CONTAINER_VERSION:
        raise FormatError(f"{path}: expected a keyed container (version 2), found version {version}")
    count = r.unpack("<I")[0]
    out = {}
    for _ in range(count):
        name = r.take(r.unpack("<H")[0]).decode("utf-8")
        kind, ndim = r.unpack("<BB")
        shape = r.unpack(f"<{ndim}Q")
        if kind == 2:
            out[name] = r.take(shape[0]).decode("utf-8")
            continue
        if kind not in _KINDS:
            raise FormatError(f"{path}: unknown entry kind {kind} for {name!r}")
        size = math.prod(shape)
        arr = np.frombuffer(r.take(8 * size), dtype=_KINDS[kind]).reshape(shape)
        out[name] = arr.astype(np.float64 if kind == 0 else np.int64)
    if r.remaining:
        raise FormatError(f"{path}: unexpected trailing bytes")
    return out


def write_container(path, entries):
    _write_bytes(path, encode_container(entries))


def read_container(path):
    return decode_container(_read_bytes(path), path)


def video_entries(video):
    return {"type": "video", "Y": video.Y, "h": video.h, "w": video.w}


def video_from_entries(e):
    _expect(e, "video")
    return VideoTensor(e["Y"], int(e["h"]), int(e["w"]))


def model_entries(model):
    return {"type": "lds_model", "C": model.C, "A": model.A, "mu": model.mu,
            "q_noise_std": model.q_noise_std, "r_noise_std": model.r_noise_std,
            "h": model.h, "w": model.w}


def model_from_entries(e):
    _expect(e, "lds_model")
    return LdsModel(e["C"], e["A"], e["mu"], float(e["q_noise_std"]), float(e["r_noise_std"]),
                    int(e["h"]), int(e["w"]), check_rank=False)


def _expect(entries, kind):
    if entries.get("type") != kind:
        raise FormatError(f"expected a {kind!r} container, found {entries.get('type')!r}")


def _write_bytes(path, data):
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise FormatError(f"cannot write {path}: {exc}") from exc


# --- PGM --------------------------------------------------------------------

def write_pgm(path, image, maxval=65535):
    """Write an integer image with values in ``[0, maxval]`` as binary PGM."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("PGM images are 2-D")
    if not 1 <= maxval <= 65535:
        raise ValueError("maxval must lie in [1, 65535]")
    if img.size and (img.min() < 0 or img.max() > maxval):
        raise ValueError(f"pixel values must lie in [0, {maxval}]")
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode("ascii")
    _write_bytes(path, header + img.astype(dtype).tobytes())


def read_pgm(path):
    """Read a binary (P5) PGM file; returns ``(image, maxval)``."""
    data = _read_bytes(path)
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        fields.append(data[start:pos])
    if fields[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM file")
    try:
        w, h, maxval = (int(f) for f in fields[1:])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PGM header") from exc
    dtype = ">u2" if maxval > 255 else "u1"
    body = data[pos + 1:]
    need = w * h * np.dtype(dtype).itemsize
    if len(body) < need:
        raise FormatError(f"{path}: truncated PGM data")
    img = np.frombuffer(body[:need], dtype=dtype).reshape(h, w).astype(np.int64)
    return img, maxval


def write_video_pgm(directory, video, bits=16):
    """Quantize `video` to a ``frame_%05d.pgm`` sequence.

    Values are scaled linearly from ``[min, max]`` to the full integer range;
    the scale is stored in ``scale.txt`` next to the frames.
    """
    maxval = 65535 if bits == 16 else 255
    lo, hi = float(video.Y.min()), float(video.Y.max())
    span = hi - lo if hi > lo else 1.0
    os.makedirs(directory, exist_ok=True)
    for t in range(video.T):
        q = np.rint((video.frame(t) - lo) / span * maxval)
        write_pgm(os.path.join(directory, f"frame_{t:05d}.pgm"), q, maxval)
    with open(os.path.join(directory, "scale.txt"), "w") as fh:
        fh.write(f"lo = {lo:.17g}\nhi = {hi:.17g}\nmaxval = {maxval}\n")
    return lo, hi


def read_video_pgm(directory):
    """Read a ``frame_%05d.pgm`` sequence, undoing the stored scale if present."""
    try:
        names = sorted(n for n in os.listdir(directory) if n.startswith("frame_") and n.endswith(".pgm"))
    except OSError as exc:
        raise FormatError(f"cannot list {directory}: {exc}") from exc
    if not names:
        raise FormatError(f"{directory}: no frame_*.pgm files")
    frames = [read_pgm(os.path.join(directory, n)) for n in names]
    h, w = frames[0][0].shape
    if any(f.shape != (h, w) for f, _ in frames):
        raise FormatError(f"{directory}: frames differ in size")
    Y = np.column_stack([f.ravel() for f, _ in frames]).astype(np.float64)
    scale_path = os.path.join(directory, "scale.txt")
    if os.path.exists(scale_path):
        s = read_config(scale_path)
        lo, hi, maxval = float(s["lo"]), float(s["hi"]), float(s["maxval"])
        span = hi - lo if hi > lo else 1.0
        Y = lo + Y / maxval * span
    return VideoTensor(Y, h, w)


# --- CSV and config ---------------------------------------------------------

def format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    return str(v)


def parse_value(s):
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def write_csv(path, rows, columns=None):
    """Write dict rows with floats at 17 significant digits."""
    rows = list(rows)
    if columns is None:
        columns = list(rows[0]) if rows else []
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in rows:
                writer.writerow([format_value(row.get(c, "")) for c in columns])
    except OSError as exc:
        raise FormatError(f"cannot write {path}: {exc}") from exc


def read_csv(path):
    """Read a CSV written by :func:`write_csv`; numeric cells are parsed."""
    try:
        with open(path, newline="") as fh:
            return [{k: parse_value(v) for k, v in row.items()} for row in csv.DictReader(fh)]
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc


def write_matrix_csv(path, M, labels=None):
    M = np.atleast_2d(M)
    cols = [str(c) for c in (labels if labels is not None else range(M.shape[1]))]
    rows = [dict({"row": (labels[i] if labels is not None else i)}, **dict(zip(cols, M[i]))) for i in range(M.shape[0])]
    write_csv(path, rows, ["row"] + cols)


def read_config(path):
    """Flat ``key = value`` file with ``#`` comments, as a dict of strings."""
    parser = configparser.ConfigParser(comment_prefixes=("#",), inline_comment_prefixes=("#",),
                                       delimiters=("=",), interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    try:
        parser.read_string("[run]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: malformed config: {exc}") from exc
    return dict(parser["run"])


def write_kv(path, values):
    with open(path, "w") as fh:
        for k, v in values.items():
            fh.write(f"{k} = {format_value(v)}\n")
