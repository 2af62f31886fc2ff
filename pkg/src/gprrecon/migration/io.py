"""Cross-section grid files ("GPRC", little-endian)::

    b"GPRC" u32 H u32 W f64 cell_m 3 x f64 pose u8 dtype u8 axis
    then H*W values, row-major: f32 (dtype 0) or u8 (dtype 1, binary masks)

``axis`` encodes the scan direction: 0 = +x, 1 = +y, 2 = -x, 3 = -y.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..scene.io import FormatError
from ..scene.truth import CrossSection
from .backprojection import MigratedImage

GRID_MAGIC = b"GPRC"
_HEADER = struct.Struct("<4sIId3dBB")
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("u1")}
_AXES = {0: (1.0, 0.0), 1: (0.0, 1.0), 2: (-1.0, 0.0), 3: (0.0, -1.0)}


def _axis_code(direction) -> int:
    d = tuple(float(v) for v in direction)
    for code, axis in _AXES.items():
        if np.allclose(d, axis, atol=1e-12):
            return code
    raise ValueError(f"grid files store axis-aligned scan directions only, got {d}")


def write_grid(grid: MigratedImage | CrossSection, path) -> int:
    """Write a mask (u8) or an energy image (f32); returns bytes written."""
    if isinstance(grid, CrossSection):
        values, code = grid.mask.astype(np.uint8), 1
    elif isinstance(grid, MigratedImage):
        values, code = grid.values.astype("<f4"), 0
    else:
        raise TypeError(f"expected MigratedImage or CrossSection, got {type(grid).__name__}")
    h, w = values.shape
    blob = _HEADER.pack(GRID_MAGIC, h, w, float(grid.cell), *grid.pose, code, _axis_code(grid.direction))
    blob += values.tobytes()
    Path(path).write_bytes(blob)
    return len(blob)


def read_grid(path) -> MigratedImage | CrossSection:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, h, w, cell, px, py, pz, code, axis = _HEADER.unpack_from(raw)
    if magic != GRID_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if code not in _DTYPES:
        raise FormatError(f"{path}: unknown dtype flag {code}")
    if axis not in _AXES:
        raise FormatError(f"{path}: unknown axis code {axis}")
    dtype = _DTYPES[code]
    expected = _HEADER.size + h * w * dtype.itemsize
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    values = np.frombuffer(raw, dtype=dtype, offset=_HEADER.size).reshape(h, w)
    if code == 1:
        try:
            return CrossSection(values.copy(), cell, (px, py, pz), _AXES[axis])
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from None
    return MigratedImage(values.astype(np.float64), cell, (px, py, pz), _AXES[axis])
