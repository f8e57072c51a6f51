"""Kinematic landing pad and its scripted trajectory families."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from padfall.errors import ConfigError
from padfall.seeding import stream

MAX_PAD_SPEED = 0.46
KINDS = ("static", "linear", "curved", "complex3d")


@dataclass(frozen=True)
class PadState:
    position: np.ndarray
    velocity: np.ndarray
    half_extent: float = 0.25


@dataclass(frozen=True)
class TrajectorySpec:
    """Seeded description of how the pad moves.

    ``waypoint_region`` is an axis-aligned box ``((xmin, ymin, zmin), (xmax, ymax, zmax))``
    that the pad center never leaves. For ``complex3d`` the horizontal speed is
    ``speed`` and a sinusoidal vertical motion of ``z_amplitude``/``z_period`` is
    layered on top.
    """

    kind: str = "static"
    seed: int = 0
    speed: float = 0.0
    direction_change_interval: float = 3.0
    waypoint_region: tuple = ((-1.5, -1.5, -0.5), (1.5, 1.5, 0.5))
    origin: tuple = (0.0, 0.0, 0.0)
    curvature_range: tuple = (0.3, 1.5)
    z_amplitude: float = 0.15
    z_period: float = 6.0
    half_extent: float = 0.25

    def __post_init__(self):
        region = tuple(tuple(float(v) for v in corner) for corner in self.waypoint_region)
        object.__setattr__(self, "waypoint_region", region)
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "curvature_range", tuple(float(v) for v in self.curvature_range))
        if self.kind not in KINDS:
            raise ConfigError(f"unknown trajectory kind {self.kind!r}; expected one of {KINDS}")
        if not 0.0 <= self.speed <= MAX_PAD_SPEED:
            raise ConfigError(f"pad speed must lie in [0, {MAX_PAD_SPEED}] m/s")
        if not self.direction_change_interval > 0:
            raise ConfigError("direction_change_interval must be > 0")
        if not self.half_extent > 0:
            raise ConfigError("half_extent must be > 0")
        lo, hi = np.array(region[0]), np.array(region[1])
        if not (np.all(lo <= self.origin) and np.all(np.array(self.origin) <= hi)):
            raise ConfigError("trajectory origin must lie inside waypoint_region")
        seg = self.speed * self.direction_change_interval
        if self.kind != "static" and np.any(hi[:2] - lo[:2] < 2 * seg):
            raise ConfigError("waypoint_region must be at least two segment lengths wide")
        if self.kind == "complex3d":
            vz_max = self.z_amplitude * 2 * math.pi / self.z_period
            if math.hypot(self.speed, vz_max) > MAX_PAD_SPEED:
                raise ConfigError("complex3d speed plus vertical oscillation exceeds the pad speed limit")
            if self.origin[2] - self.z_amplitude < lo[2] or self.origin[2] + self.z_amplitude > hi[2]:
                raise ConfigError("z oscillation leaves waypoint_region")


@dataclass(frozen=True)
class _Segment:
    start: tuple
    heading: float
    curvature: float  # 0 for straight segments


_MARGIN = 1e-3


def _arc_point(start, heading, curvature, s):
    if curvature == 0.0:
        return start[0] + s * math.cos(heading), start[1] + s * math.sin(heading)
    r = 1.0 / curvature
    return (
        start[0] + r * (math.sin(heading + curvature * s) - math.sin(heading)),
        start[1] - r * (math.cos(heading + curvature * s) - math.cos(heading)),
    )


def _arc_inside(start, heading, curvature, length, lo, hi) -> bool:
    for k in range(1, 33):
        x, y = _arc_point(start, heading, curvature, length * k / 32)
        if not (lo[0] + _MARGIN <= x <= hi[0] - _MARGIN and lo[1] + _MARGIN <= y <= hi[1] - _MARGIN):
            return False
    return True


@lru_cache(maxsize=256)
def _segments(spec: TrajectorySpec, count: int) -> tuple:
    rng = stream(spec.seed, "trajectory", spec.kind)
    lo, hi = spec.waypoint_region
    length = spec.speed * spec.direction_change_interval
    segments = []
    start = spec.origin[:2]
    for _ in range(count):
        for attempt in range(256):
            heading = float(rng.uniform(-math.pi, math.pi))
            if spec.kind == "linear":
                curvature = 0.0
            else:
                kappa = float(rng.uniform(*spec.curvature_range))
                curvature = kappa if rng.random() < 0.5 else -kappa
            if _arc_inside(start, heading, curvature, length, lo, hi):
                break
        else:
            cx, cy = (lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2
            heading, curvature = math.atan2(cy - start[1], cx - start[0]), 0.0
        segments.append(_Segment(start, heading, curvature))
        start = _arc_point(start, heading, curvature, length)
    return tuple(segments)


def pad_state_at(spec: TrajectorySpec, t: float) -> PadState:
    """Pad pose and velocity at time ``t``; a pure function of ``(spec, t)``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if spec.kind not in KINDS:
        raise ConfigError(f"unknown trajectory kind {spec.kind!r}")
    origin = spec.origin
    if spec.kind == "static" or spec.speed == 0.0:
        position = np.array(origin)
        velocity = np.zeros(3)
    else:
        index = int(t // spec.direction_change_interval)
        # Grow the cache in chunks so successive calls share one prefix.
        chunk = 64 * (index // 64 + 1)
        seg = _segments(spec, chunk)[index]
        s = spec.speed * (t - index * spec.direction_change_interval)
        x, y = _arc_point(seg.start, seg.heading, seg.curvature, s)
        heading = seg.heading + seg.curvature * s
        position = np.array([x, y, origin[2]])
        velocity = np.array([spec.speed * math.cos(heading), spec.speed * math.sin(heading), 0.0])
    if spec.kind == "complex3d":
        omega = 2 * math.pi / spec.z_period
        position[2] = origin[2] + spec.z_amplitude * math.sin(omega * t)
        velocity[2] = spec.z_amplitude * omega * math.cos(omega * t)
    return PadState(position, velocity, spec.half_extent)


def pad_frame_offset(drone_position, pad: PadState):
    """Vector from the drone to the pad center, world frame.

    The second element is reserved for the relative velocity, which the
    observation builder computes itself; it is always ``None`` here.
    """
    return pad.position - np.asarray(drone_position, dtype=np.float64), None


@dataclass(frozen=True)
class PadTrajectory:
    """Convenience wrapper binding a spec for repeated lookups."""

    spec: TrajectorySpec = field(default_factory=TrajectorySpec)

    def __call__(self, t: float) -> PadState:
        return pad_state_at(self.spec, t)
