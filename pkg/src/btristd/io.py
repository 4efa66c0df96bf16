"""Frame and tensor file formats.

Frames are binary PGM (P5) images, 8-bit or 16-bit big-endian. A directory
of PGMs in lexicographic order is a sequence.

Tensors use a small raw format::

    b"BTRT" | u32 order N | N x u64 extents | prod(extents) x f64 values

all little-endian, values in first-index-fastest order.
"""

from __future__ import annotations

import os
import re
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, ParameterError, ShapeError

TENSOR_MAGIC = b"BTRT"

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def read_pgm(path) -> np.ndarray:
    """Load a P5 image as floats in [0, 1] (divided by maxval)."""
    data = Path(path).read_bytes()
    pos = 0
    fields = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise FormatError(f"{path}: truncated PGM header")
        fields.append(m.group(1))
        pos = m.end()
    if fields[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (magic {fields[0]!r})")
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError as exc:
        raise FormatError(f"{path}: bad PGM header: {exc}") from exc
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise FormatError(f"{path}: bad PGM header {width}x{height} maxval {maxval}")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FormatError(f"{path}: missing whitespace after PGM header")
    pos += 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    n = width * height
    if len(data) - pos < n * dtype.itemsize:
        raise FormatError(f"{path}: pixel data truncated")
    px = np.frombuffer(data, dtype=dtype, count=n, offset=pos).reshape(height, width)
    return px.astype(float) / maxval


def write_pgm(path, frame: np.ndarray, bits: int = 8) -> None:
    """Store a [0, 1] frame, rounding half up and clipping to the valid range."""
    if bits not in (8, 16):
        raise ParameterError(f"bits must be 8 or 16, got {bits}")
    frame = np.asarray(frame, dtype=float)
    if frame.ndim != 2:
        raise ShapeError(f"frame must be 2D, got shape {frame.shape}")
    maxval = 255 if bits == 8 else 65535
    q = np.floor(np.clip(frame, 0.0, 1.0) * maxval + 0.5).astype(np.int64)
    q = np.clip(q, 0, maxval).astype(">u2" if bits == 16 else "u1")
    h, w = frame.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n%d\n" % (w, h, maxval))
        fh.write(q.tobytes())


def load_frames(directory) -> np.ndarray:
    """All ``*.pgm`` files of a directory, sorted by name, as ``(n, h, w)``."""
    paths = sorted(p for p in Path(directory).iterdir() if p.suffix.lower() == ".pgm")
    if not paths:
        raise FormatError(f"{directory}: no .pgm files")
    frames = [read_pgm(p) for p in paths]
    shapes = {f.shape for f in frames}
    if len(shapes) > 1:
        raise FormatError(f"{directory}: frames have different sizes {sorted(shapes)}")
    return np.stack(frames)


def save_frames(frames, directory, bits: int = 8) -> list[Path]:
    os.makedirs(directory, exist_ok=True)
    paths = []
    for k, frame in enumerate(frames):
        p = Path(directory) / f"{k:04d}.pgm"
        write_pgm(p, frame, bits)
        paths.append(p)
    return paths


def write_tensor(path, t: np.ndarray) -> None:
    t = np.asarray(t, dtype="<f8")
    if t.ndim == 0:
        t = t.reshape(1)
    header = TENSOR_MAGIC + struct.pack("<I", t.ndim) + struct.pack(f"<{t.ndim}Q", *t.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(t.tobytes(order="F"))


def read_tensor(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != TENSOR_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 8:
        raise FormatError(f"{path}: truncated header")
    (order,) = struct.unpack_from("<I", data, 4)
    if order < 1:
        raise FormatError(f"{path}: tensor order must be >= 1")
    end = 8 + 8 * order
    if len(data) < end:
        raise FormatError(f"{path}: truncated extents")
    shape = struct.unpack_from(f"<{order}Q", data, 8)
    count = int(np.prod(shape, dtype=np.int64))
    if len(data) != end + 8 * count:
        raise FormatError(f"{path}: payload has {len(data) - end} bytes, expected {8 * count}")
    values = np.frombuffer(data, dtype="<f8", count=count, offset=end)
    return values.reshape(shape, order="F").astype(float)
