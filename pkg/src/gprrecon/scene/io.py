"""Scene text files and binary B-scan files.

Scene file::

    slab <size_x> <size_y> <size_z> <eps_r>
    pipe <x1> <y1> <z1> <x2> <y2> <z2> <radius> <material>

B-scan file ("GPRB", little-endian)::

    b"GPRB" u32 T u32 K f64 dt_ns f64 trace_spacing_m
    K x (3 x f64 pose) then T*K f32 amplitudes, row-major (time-major)
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..kinematics import SurveyPose
from .forward import BScan
from .geometry import Pipe, PipeScene

BSCAN_MAGIC = b"GPRB"


class FormatError(ValueError):
    """Malformed input file."""


def format_scene(scene: PipeScene) -> str:
    sx, sy, sz = scene.extents
    out = [f"slab {sx!r} {sy!r} {sz!r} {scene.eps_r!r}\n"]
    for p in scene.pipes:
        out.append("pipe " + " ".join(repr(v) for v in (*p.start, *p.end, p.radius)) + f" {p.material}\n")
    return "".join(out)


def parse_scene(text: str, source: str = "<scene>") -> PipeScene:
    slab = None
    pipes = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        parts = s.split()
        try:
            if parts[0] == "slab":
                if slab is not None:
                    raise FormatError("duplicate slab line")
                if len(parts) != 5:
                    raise FormatError("expected 'slab x y z eps_r'")
                slab = tuple(float(v) for v in parts[1:])
            elif parts[0] == "pipe":
                if slab is None:
                    raise FormatError("pipe before slab header")
                if len(parts) not in (8, 9):
                    raise FormatError("expected 'pipe x1 y1 z1 x2 y2 z2 radius material'")
                v = [float(x) for x in parts[1:8]]
                material = parts[8] if len(parts) == 9 else "metal"
                pipes.append(Pipe(tuple(v[0:3]), tuple(v[3:6]), v[6], material))
            else:
                raise FormatError(f"unknown record {parts[0]!r}")
        except (ValueError, FormatError) as exc:
            raise FormatError(f"{source}:{lineno}: {exc}") from None
    if slab is None:
        raise FormatError(f"{source}: missing 'slab' header")
    try:
        return PipeScene(slab[:3], slab[3], pipes)
    except ValueError as exc:
        raise FormatError(f"{source}: {exc}") from None


def write_scene(scene: PipeScene, path) -> None:
    Path(path).write_text(format_scene(scene))


def read_scene(path) -> PipeScene:
    return parse_scene(Path(path).read_text(), str(path))


def write_bscan(bscan: BScan, path) -> int:
    t, k = bscan.amplitudes.shape
    header = BSCAN_MAGIC + struct.pack("<IIdd", t, k, bscan.dt, bscan.trace_spacing)
    poses = np.array([[p.x, p.y, p.z] for p in bscan.poses], dtype="<f8")
    blob = header + poses.tobytes() + np.ascontiguousarray(bscan.amplitudes, dtype="<f4").tobytes()
    Path(path).write_bytes(blob)
    return len(blob)


def read_bscan(path) -> BScan:
    blob = Path(path).read_bytes()
    if blob[:4] != BSCAN_MAGIC:
        raise FormatError(f"{path}: bad magic")
    if len(blob) < 28:
        raise FormatError(f"{path}: truncated header")
    t, k, dt, spacing = struct.unpack("<IIdd", blob[4:28])
    expected = 28 + 24 * k + 4 * t * k
    if len(blob) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for T={t}, K={k}, found {len(blob)}")
    poses = np.frombuffer(blob, dtype="<f8", count=3 * k, offset=28).reshape(k, 3)
    amps = np.frombuffer(blob, dtype="<f4", count=t * k, offset=28 + 24 * k).reshape(t, k)
    pose_list = [SurveyPose(float(p[0]), float(p[1]), float(p[2])) for p in poses]
    return BScan(amps.astype(np.float64), dt, pose_list, spacing)
