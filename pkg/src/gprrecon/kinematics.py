"""Three-wheel omnidirectional chassis kinematics and rotation-free survey plans."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

# surface speed used to timestamp simulated traces
NOMINAL_SPEED = 0.2  # m/s


@dataclass(frozen=True)
class BodyTwist:
    v_x: float
    v_y: float
    omega: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v_x, self.v_y, self.omega], dtype=np.float64)


@dataclass(frozen=True)
class WheelVelocities:
    v_w1_drv: float
    v_w2_drv: float
    v_w3_drv: float
    d: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v_w1_drv, self.v_w2_drv, self.v_w3_drv], dtype=np.float64)


def wheel_matrix(d: float) -> np.ndarray:
    """Rows ``[cos a, sin a, -d]`` for wheel angles 0, 2pi/3, -2pi/3."""
    if not d > 0:
        raise ValueError(f"wheel-to-centre distance must be positive, got {d}")
    a = 2.0 * math.pi / 3.0
    return np.array([
        [1.0, 0.0, -d],
        [math.cos(a), math.sin(a), -d],
        [math.cos(-a), math.sin(-a), -d],
    ])


def wheel_velocities(twist: BodyTwist, d: float) -> WheelVelocities:
    w = wheel_matrix(d) @ twist.as_array()
    return WheelVelocities(float(w[0]), float(w[1]), float(w[2]), d)


def body_twist_from_wheels(wheels: WheelVelocities) -> BodyTwist:
    t = np.linalg.solve(wheel_matrix(wheels.d), wheels.as_array())
    return BodyTwist(float(t[0]), float(t[1]), float(t[2]))


@dataclass(frozen=True)
class SurveyPose:
    """Antenna position on the slab surface. Heading is always the identity."""
    x: float
    y: float
    z: float = 0.0
    timestamp: float = 0.0
    heading: float = 0.0

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class ScanLine:
    start: tuple[float, float]
    end: tuple[float, float]
    trace_spacing: float

    def __post_init__(self):
        if not self.trace_spacing > 0:
            raise ValueError(f"trace spacing must be positive, got {self.trace_spacing}")
        if self.length == 0:
            raise ValueError("scan line has zero length")

    @property
    def length(self) -> float:
        return float(math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1]))

    @property
    def direction(self) -> np.ndarray:
        d = np.array([self.end[0] - self.start[0], self.end[1] - self.start[1]])
        return d / np.linalg.norm(d)

    @property
    def n_traces(self) -> int:
        return int(math.floor(self.length / self.trace_spacing + 1e-9)) + 1

    def trace_positions(self) -> np.ndarray:
        """``(K, 2)`` antenna xy positions at ``k * trace_spacing`` along the line."""
        s = np.arange(self.n_traces) * self.trace_spacing
        return np.asarray(self.start)[None, :] + s[:, None] * self.direction[None, :]


@dataclass
class SurveyPlan:
    lines: list[ScanLine]
    line_spacing: float
    direction: str = "x"
    poses: list[list[SurveyPose]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.lines)


def drive_line(line: ScanLine, t0: float = 0.0, speed: float = NOMINAL_SPEED, d: float = 0.2,
               jitter: float = 0.0, rng: np.random.Generator | None = None,
               bounds: tuple[float, float] | None = None) -> list[SurveyPose]:
    """Timestamped poses for one scan line.

    The commanded body twist is pushed through the wheel map and back, which
    is what a robot replaying its wheel encoders would see; positions are
    then integrated at each trace. ``jitter`` adds Gaussian xy position error,
    clipped to ``[0, bounds]`` when given so the antenna stays on the slab.
    """
    vx, vy = speed * line.direction
    twist = body_twist_from_wheels(wheel_velocities(BodyTwist(vx, vy, 0.0), d))
    v = math.hypot(twist.v_x, twist.v_y)
    xy = line.trace_positions()
    if jitter > 0:
        rng = np.random.default_rng(0) if rng is None else rng
        xy = xy + rng.normal(0.0, jitter, size=xy.shape)
        if bounds is not None:
            xy = np.clip(xy, 0.0, np.asarray(bounds, dtype=np.float64))
    s = np.arange(len(xy)) * line.trace_spacing
    return [SurveyPose(float(p[0]), float(p[1]), 0.0, t0 + float(si) / v) for p, si in zip(xy, s)]


def plan_grid_survey(extents: Sequence[float], line_spacing: float, trace_spacing: float,
                     direction: str = "x", jitter: float = 0.0, seed: int = 0,
                     speed: float = NOMINAL_SPEED) -> SurveyPlan:
    """Parallel scan lines over a slab with ``extents = (size_x, size_y[, ...])``.

    ``direction="x"`` drives lines along x, stepping ``line_spacing`` in y
    from y = 0; ``"y"`` swaps the roles. A spacing larger than the slab gives
    one centred line.
    """
    if direction not in ("x", "y"):
        raise ValueError(f"direction must be 'x' or 'y', got {direction!r}")
    if not line_spacing > 0 or not trace_spacing > 0:
        raise ValueError("line and trace spacing must be positive")
    size_x, size_y = float(extents[0]), float(extents[1])
    along, across = (size_x, size_y) if direction == "x" else (size_y, size_x)
    if trace_spacing > along:
        raise ValueError(f"trace spacing {trace_spacing} exceeds line length {along}")
    if line_spacing > across:
        logger.warning("line spacing %.3g m exceeds slab extent %.3g m; using one centred line",
                       line_spacing, across)
        offsets = [across / 2.0]
    else:
        n = int(math.floor(across / line_spacing + 1e-9)) + 1
        offsets = [i * line_spacing for i in range(n)]

    lines = []
    for off in offsets:
        if direction == "x":
            lines.append(ScanLine((0.0, off), (along, off), trace_spacing))
        else:
            lines.append(ScanLine((off, 0.0), (off, along), trace_spacing))

    rng = np.random.default_rng(seed)
    poses, t = [], 0.0
    for line in lines:
        line_poses = drive_line(line, t0=t, speed=speed, jitter=jitter, rng=rng, bounds=(size_x, size_y))
        poses.append(line_poses)
        t = line_poses[-1].timestamp + 1.0
    return SurveyPlan(lines, float(line_spacing), direction, poses)


# --- text serialisation: "line x1 y1 x2 y2 trace_spacing" ---------------------

def format_survey(plan: SurveyPlan | Iterable[ScanLine]) -> str:
    lines = plan.lines if isinstance(plan, SurveyPlan) else list(plan)
    return "".join(f"line {l.start[0]!r} {l.start[1]!r} {l.end[0]!r} {l.end[1]!r} {l.trace_spacing!r}\n"
                   for l in lines)


def parse_survey(text: str, source: str = "<survey>") -> list[ScanLine]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        parts = s.split()
        if parts[0] != "line" or len(parts) != 6:
            raise ValueError(f"{source}:{lineno}: expected 'line x1 y1 x2 y2 trace_spacing', got {raw!r}")
        try:
            x1, y1, x2, y2, ts = (float(p) for p in parts[1:])
            out.append(ScanLine((x1, y1), (x2, y2), ts))
        except ValueError as exc:
            raise ValueError(f"{source}:{lineno}: {exc}") from None
    return out


def write_survey(plan, path) -> None:
    Path(path).write_text(format_survey(plan))


def read_survey(path) -> list[ScanLine]:
    return parse_survey(Path(path).read_text(), str(path))
