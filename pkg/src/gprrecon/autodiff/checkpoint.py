"""Named-tensor checkpoint files ("GPRN").

Layout, little-endian throughout::

    b"GPRN"  u16 version  u32 count
    count x { u16 name_len, name (utf-8), u8 dtype (0 = f64), u8 rank,
              rank x u32 dims, raw data }
"""
from __future__ import annotations

import struct
from collections import OrderedDict
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"GPRN"
VERSION = 1
DTYPE_F64 = 0
HEADER_SIZE = 4 + 2 + 4


class CheckpointError(ValueError):
    pass


def tensor_record_size(name: str, shape) -> int:
    return 2 + len(name.encode("utf-8")) + 1 + 1 + 4 * len(shape) + 8 * int(np.prod(shape, dtype=np.int64))


def save_checkpoint(params: Mapping[str, np.ndarray], path) -> int:
    """Write named arrays to ``path``; returns the number of bytes written."""
    chunks = [MAGIC, struct.pack("<HI", VERSION, len(params))]
    seen = set()
    for name, value in params.items():
        if name in seen:
            raise CheckpointError(f"duplicate tensor name {name!r}")
        seen.add(name)
        arr = np.asarray(getattr(value, "data", value), dtype="<f8")
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF or arr.ndim > 0xFF:
            raise CheckpointError(f"tensor {name!r} cannot be encoded")
        chunks.append(struct.pack("<H", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<BB", DTYPE_F64, arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr).tobytes())
    blob = b"".join(chunks)
    Path(path).write_bytes(blob)
    return len(blob)


def load_checkpoint(path) -> "OrderedDict[str, np.ndarray]":
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise CheckpointError("bad magic")
    pos = 4

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(blob):
            raise CheckpointError(f"truncated checkpoint: needed {n} bytes at offset {pos}, file has {len(blob)}")
        out = blob[pos:pos + n]
        pos += n
        return out

    version, count = struct.unpack("<HI", take(6))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    params: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        dtype, rank = struct.unpack("<BB", take(2))
        if dtype != DTYPE_F64:
            raise CheckpointError(f"tensor {name!r}: unknown dtype code {dtype}")
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        n = int(np.prod(shape, dtype=np.int64))
        params[name] = np.frombuffer(take(8 * n), dtype="<f8").astype(np.float64).reshape(shape)
    if pos != len(blob):
        raise CheckpointError(f"{len(blob) - pos} trailing bytes after {count} tensors")
    return params
