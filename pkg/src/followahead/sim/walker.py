"""Scripted skeleton walkers.

The hip follows a waypoint polyline whose corners are rounded by circular
fillets, parametrized by arc length. Limbs swing sinusoidally with a gait
phase tied to distance travelled, so a still walker holds its pose. In crab
mode the body faces perpendicular to the direction of travel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..encoding import HIP, SkeletonSequence
from ..errors import InvalidArgument
from ..geometry import wrap_angle
from ..gridworld import is_collision
from .maps import KINDS, MapParams, WorldMap, generate_map

STYLES = ("walk", "crab", "variable-speed")

STRIDE = 1.2         # meters per gait cycle
LEG_SWING = 0.35     # radians
THIGH = SHIN = 0.42
UPPER_ARM, FOREARM = 0.28, 0.25
VAR_AMPLITUDE = 0.35


class Path:
    """Polyline with filleted corners, evaluated by arc length."""

    def __init__(self, waypoints, radius: float = 0.6):
        pts = np.asarray(waypoints, dtype=np.float64).reshape(-1, 2)
        if len(pts) < 2:
            raise InvalidArgument("a path needs at least two waypoints")
        if np.any(np.hypot(*np.diff(pts, axis=0).T) <= 0):
            raise InvalidArgument("consecutive waypoints must differ")
        self.waypoints = pts
        self.pieces: list[tuple] = []
        seg = np.diff(pts, axis=0)
        lens = np.hypot(seg[:, 0], seg[:, 1])
        dirs = seg / lens[:, None]
        # tangent offset at each interior corner
        cut = np.zeros(len(pts))
        arcs = {}
        for k in range(1, len(pts) - 1):
            d1, d2 = dirs[k - 1], dirs[k]
            turn = math.atan2(d1[0] * d2[1] - d1[1] * d2[0], float(d1 @ d2))
            if abs(turn) < 1e-9:
                continue
            rho = min(radius, 0.45 * min(lens[k - 1], lens[k]) / math.tan(abs(turn) / 2))
            t = rho * math.tan(abs(turn) / 2)
            cut[k] = t
            arcs[k] = (rho, turn)
        cursor = pts[0].copy()
        for k in range(len(seg)):
            end = pts[k + 1] - dirs[k] * cut[k + 1]
            length = float(np.hypot(*(end - cursor)))
            if length > 0:
                self.pieces.append(("line", length, cursor.copy(), dirs[k].copy()))
            if k + 1 in arcs:
                rho, turn = arcs[k + 1]
                side = 1.0 if turn > 0 else -1.0
                normal = np.array([-dirs[k][1], dirs[k][0]]) * side
                center = end + rho * normal
                a0 = math.atan2(end[1] - center[1], end[0] - center[0])
                self.pieces.append(("arc", rho * abs(turn), center, (rho, a0, turn)))
                cursor = pts[k + 1] + dirs[k + 1] * cut[k + 1]
            else:
                cursor = end
        self.starts = np.concatenate([[0.0], np.cumsum([p[1] for p in self.pieces])])
        self.length = float(self.starts[-1])

    def at(self, s: float):
        """(position, tangent heading) at arc length s, clamped to [0, length]."""
        s = min(max(float(s), 0.0), self.length)
        k = int(np.searchsorted(self.starts, s, side="right") - 1)
        k = min(k, len(self.pieces) - 1)
        kind, length, a, b = self.pieces[k]
        ds = s - self.starts[k]
        if kind == "line":
            return a + b * ds, math.atan2(b[1], b[0])
        rho, a0, turn = b
        ang = a0 + math.copysign(ds / rho, turn)
        pos = a + rho * np.array([math.cos(ang), math.sin(ang)])
        return pos, wrap_angle(ang + math.copysign(math.pi / 2, turn))


@dataclass(frozen=True)
class Scenario:
    world: WorldMap
    waypoints: np.ndarray
    style: str
    speed: float
    seed: int
    duration: float
    hip_z: float = 0.95
    period: float = 4.0
    phase0: float = 0.0
    crab_side: float = 1.0

    def __post_init__(self):
        if self.style not in STYLES:
            raise InvalidArgument(f"unknown motion style {self.style!r}")
        if self.speed < 0 or self.duration < 0:
            raise InvalidArgument("speed and duration must be non-negative")
        for wp in np.asarray(self.waypoints, dtype=np.float64).reshape(-1, 2):
            if is_collision(self.world.grid, wp):
                raise InvalidArgument(f"waypoint ({wp[0]:.2f}, {wp[1]:.2f}) is not in free space")

    @property
    def grid(self):
        return self.world.grid

    @property
    def path(self) -> Path:
        cached = self.__dict__.get("_path")
        if cached is None:
            cached = Path(self.waypoints)
            object.__setattr__(self, "_path", cached)
        return cached

    def distance_at(self, t: float) -> float:
        """Arc length covered by time t, held at the end of the route."""
        if self.style == "variable-speed":
            w = 2 * math.pi / self.period
            s = self.speed * (t - VAR_AMPLITUDE / w * (math.cos(w * t + self.phase0) - math.cos(self.phase0)))
        else:
            s = self.speed * t
        return min(s, self.path.length)


def make_scenario(kind: str, seed: int, style: str | None = None, params: MapParams = MapParams(),
                  duration: float | None = None, route: int | None = None) -> Scenario:
    """Random map, route, style and speed from ``seed``; duration covers the whole route by default."""
    if kind not in KINDS:
        raise InvalidArgument(f"unknown map kind {kind!r}")
    rng = np.random.default_rng([seed, 7])
    world = generate_map(kind, params, seed)
    k = int(rng.integers(len(world.routes))) if route is None else route
    style = style or STYLES[int(rng.integers(len(STYLES)))]
    speed = float(rng.uniform(0.45, 0.65)) if style != "crab" else float(rng.uniform(0.35, 0.5))
    sc = Scenario(world, world.routes[k], style, speed, seed, 0.0, hip_z=float(rng.uniform(0.88, 1.0)),
                  period=float(rng.uniform(3.0, 6.0)), phase0=float(rng.uniform(0, 2 * math.pi)),
                  crab_side=float(rng.choice([-1.0, 1.0])))
    if duration is None:
        # walk the route and linger a moment at the end
        duration = _time_to_cover(sc) + 0.6
    return Scenario(world, sc.waypoints, style, speed, seed, float(duration), sc.hip_z, sc.period, sc.phase0,
                    sc.crab_side)


def _time_to_cover(sc: Scenario) -> float:
    if sc.speed <= 0:
        return 0.0
    lo, hi = 0.0, sc.path.length / (sc.speed * (1 - VAR_AMPLITUDE)) + 1.0
    for _ in range(60):
        mid = (lo + hi) / 2
        if sc.distance_at(mid) >= sc.path.length:
            hi = mid
        else:
            lo = mid
    return hi


def body_pose(hip: np.ndarray, heading: float, motion: float, phase: float) -> np.ndarray:
    """(13, 3) joints for a hip position (x, y, z), body heading and travel direction."""
    f = np.array([math.cos(heading), math.sin(heading), 0.0])
    l = np.array([-math.sin(heading), math.cos(heading), 0.0])
    z = np.array([0.0, 0.0, 1.0])
    m = np.array([math.cos(motion), math.sin(motion), 0.0])
    a_l = LEG_SWING * math.sin(phase)
    a_r = -a_l
    J = np.empty((13, 3))
    J[0] = hip
    J[1] = hip + 0.3 * z
    J[2] = hip + 0.65 * z + 0.05 * f
    for sh, el, wr, side, swing in ((3, 4, 5, 1.0, a_r), (6, 7, 8, -1.0, a_l)):
        # arms swing against the leg on the same side
        J[sh] = hip + 0.45 * z + 0.2 * side * l
        J[el] = J[sh] + UPPER_ARM * (math.sin(0.8 * swing) * m - math.cos(0.8 * swing) * z)
        J[wr] = J[el] + FOREARM * (math.sin(0.8 * swing + 0.3) * m - math.cos(0.8 * swing + 0.3) * z)
    for kn, an, side, swing in ((9, 10, 1.0, a_l), (11, 12, -1.0, a_r)):
        top = hip + 0.1 * side * l
        J[kn] = top + THIGH * (math.sin(swing) * m - math.cos(swing) * z)
        J[an] = J[kn] + SHIN * (math.sin(0.6 * swing) * m - math.cos(0.6 * swing) * z)
    return J


def walk(scenario: Scenario, t: float):
    """World joints (13, 3) and body heading of the walker at time t."""
    if not 0.0 <= t <= scenario.duration + 1e-9:
        raise InvalidArgument(f"t={t} outside [0, {scenario.duration}]")
    s = scenario.distance_at(t)
    pos, tangent = scenario.path.at(s)
    heading = tangent
    if scenario.style == "crab":
        heading = wrap_angle(tangent + scenario.crab_side * math.pi / 2)
    hip = np.array([pos[0], pos[1], scenario.hip_z])
    return body_pose(hip, heading, tangent, 2 * math.pi * s / STRIDE), heading


def frame_times(duration: float, rate: float) -> np.ndarray:
    """Sample times k / rate for k < floor(duration * rate)."""
    count = int(math.floor(duration * rate + 1e-9))
    return np.arange(count) / rate


def skeleton(scenario: Scenario, times) -> SkeletonSequence:
    times = np.asarray(times, dtype=np.float64)
    frames = np.stack([walk(scenario, float(t))[0] for t in times])
    dt = float(times[1] - times[0]) if len(times) > 1 else 0.2
    return SkeletonSequence(frames, HIP, dt)
