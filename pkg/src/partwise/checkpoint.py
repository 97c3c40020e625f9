"""Binary container for named float32 tensors.

Layout, all little-endian:

    magic "PWT1"
    u32 tensor count
    per tensor: u32 name length, UTF-8 name bytes,
                u32 rank, u32 dims[rank], raw float32 data

Writers emit names in sorted order so equal parameter sets produce
byte-identical files. Round-trips are bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .tensor import Tensor

MAGIC = b"PWT1"


def save_tensors(path, tensors: dict) -> None:
    """Write a name -> Tensor/ndarray mapping; data is stored as float32."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            arr = tensors[name]
            data = arr.data if isinstance(arr, Tensor) else np.asarray(arr)
            data = np.ascontiguousarray(data, dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(data.tobytes())


def load_tensors(path) -> dict:
    """Read a checkpoint back into a name -> float32 ndarray mapping."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise OSError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        (count,) = struct.unpack("<I", fh.read(4))
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", fh.read(4))
            dims = struct.unpack(f"<{rank}I", fh.read(4 * rank)) if rank else ()
            n = int(np.prod(dims, dtype=np.int64)) if dims else 1
            raw = fh.read(4 * n)
            if len(raw) != 4 * n:
                raise OSError(f"{path}: truncated data for tensor {name!r}")
            out[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
    return out


def write_pgm(path, values: np.ndarray) -> None:
    """Write a 2-d array as binary PGM, min-max scaled to [0, 255].

    A constant input maps to all zeros.
    """
    arr = np.asarray(values, dtype=np.float64)
    lo, hi = float(arr.min()), float(arr.max())
    if hi - lo < 1e-12:
        scaled = np.zeros_like(arr)
    else:
        scaled = (arr - lo) / (hi - lo) * 255.0
    img = np.clip(np.rint(scaled), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
