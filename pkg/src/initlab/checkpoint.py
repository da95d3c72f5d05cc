"""Binary checkpoint files holding named float32 tensors.

Layout: magic "INIT1", one format-version byte, uint32 tensor count, then per
tensor: uint16 name length, UTF-8 name, uint8 rank, uint32 per dim, and the
row-major float32 little-endian values.  All integers are little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"INIT1"
VERSION = 1


def save_tensors(path, tensors):
    """Write a name -> array mapping; values are stored as float32."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", VERSION))
        fh.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            arr = np.ascontiguousarray(arr, dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.tobytes())


def _read_exact(fh, count, path):
    buf = fh.read(count)
    if len(buf) != count:
        raise ValueError(f"corrupt checkpoint {path}: truncated file")
    return buf


def load_tensors(path):
    """Read a checkpoint written by save_tensors; returns name -> float32 array."""
    path = Path(path)
    out = {}
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"corrupt checkpoint {path}: bad magic")
        (version,) = struct.unpack("<B", _read_exact(fh, 1, path))
        if version != VERSION:
            raise ValueError(f"corrupt checkpoint {path}: unsupported version {version}")
        (count,) = struct.unpack("<I", _read_exact(fh, 4, path))
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, path))
            name = _read_exact(fh, name_len, path).decode("utf-8")
            (rank,) = struct.unpack("<B", _read_exact(fh, 1, path))
            shape = tuple(
                struct.unpack("<I", _read_exact(fh, 4, path))[0] for _ in range(rank)
            )
            n_values = int(np.prod(shape)) if shape else 1
            raw = _read_exact(fh, 4 * n_values, path)
            out[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
        if fh.read(1):
            raise ValueError(f"corrupt checkpoint {path}: trailing bytes")
    return out
