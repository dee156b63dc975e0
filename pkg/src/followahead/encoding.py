"""Skeleton sequences, trajectory maps and soft-argmax decoding."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgument
from .geometry import ActorFrame

# 13-joint layout used by the simulator; hip is the torso anchor.
JOINT_NAMES = (
    "hip", "spine", "head",
    "l_shoulder", "l_elbow", "l_wrist",
    "r_shoulder", "r_elbow", "r_wrist",
    "l_knee", "l_ankle", "r_knee", "r_ankle",
)
HIP = 0
L_SHOULDER = 3
R_SHOULDER = 6

DEFAULT_SIGMA = 1.5
DEFAULT_BETA = 10.0


@dataclass(frozen=True, eq=False)
class SkeletonSequence:
    """N frames of J joints in meters. ``dt`` is the frame period in seconds."""

    frames: np.ndarray
    hip_index: int = HIP
    dt: float = 0.2

    def __post_init__(self):
        frames = np.array(self.frames, dtype=np.float64)
        if frames.ndim != 3 or frames.shape[2] != 3 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise InvalidArgument(f"frames must have shape (N, J, 3), got {frames.shape}")
        if not 0 <= self.hip_index < frames.shape[1]:
            raise InvalidArgument("hip_index out of range")
        if not self.dt > 0:
            raise InvalidArgument("dt must be positive")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    def __len__(self):
        return self.frames.shape[0]

    @property
    def num_joints(self) -> int:
        return self.frames.shape[1]

    @property
    def hips(self) -> np.ndarray:
        return self.frames[:, self.hip_index, :]


@dataclass(frozen=True, eq=False)
class Trajectory2D:
    points: np.ndarray
    dt: float = 0.2

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).reshape(-1, 2)
        if not np.all(np.isfinite(pts)):
            raise InvalidArgument("trajectory points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True, eq=False)
class LocalPoseSequence:
    """Hip-relative joints, shape (N, J, 3)."""

    frames: np.ndarray
    hip_index: int = HIP

    def __post_init__(self):
        frames = np.array(self.frames, dtype=np.float64)
        if frames.ndim != 3 or frames.shape[2] != 3:
            raise InvalidArgument(f"frames must have shape (N, J, 3), got {frames.shape}")
        if not 0 <= self.hip_index < frames.shape[1]:
            raise InvalidArgument("hip_index out of range")
        if np.any(frames[:, self.hip_index] != 0.0):
            raise InvalidArgument("hip joint of a local pose must be at the origin")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    def __len__(self):
        return self.frames.shape[0]


@dataclass(frozen=True)
class Georef:
    """Pixel raster placement: pixel (u, v) center = origin + resolution * (u, v) in ``frame``."""

    width: int
    height: int
    resolution: float
    origin: tuple[float, float]
    frame: ActorFrame | None = None

    @classmethod
    def of(cls, grid) -> "Georef":
        return cls(grid.width, grid.height, grid.resolution, tuple(grid.origin), grid.frame)

    @classmethod
    def centered(cls, d_x: float, d_y: float, resolution: float, frame: ActorFrame | None = None) -> "Georef":
        return cls(int(round(2 * d_x / resolution)), int(round(2 * d_y / resolution)), resolution, (-d_x, -d_y), frame)

    def local(self) -> "Georef":
        """Same raster expressed in its own frame coordinates."""
        return Georef(self.width, self.height, self.resolution, self.origin, None)


@dataclass(frozen=True, eq=False)
class HeatmapStack:
    """C channels of H x W values, stored channel-first as ``values[c, v, u]``."""

    values: np.ndarray
    geo: Georef

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim != 3 or min(vals.shape) < 1:
            raise InvalidArgument(f"values must have shape (C, H, W), got {vals.shape}")
        if vals.shape[1:] != (self.geo.height, self.geo.width):
            raise InvalidArgument("values do not match the georeference size")
        object.__setattr__(self, "values", vals)

    @property
    def channels(self) -> int:
        return self.values.shape[0]


def world_to_pixel(p, geo) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if geo.frame is not None:
        p = geo.frame.to_local(p)
    return (p - np.asarray(geo.origin)) / geo.resolution


def pixel_to_world(uv, geo) -> np.ndarray:
    p = np.asarray(geo.origin) + geo.resolution * np.asarray(uv, dtype=np.float64)
    if geo.frame is not None:
        p = geo.frame.to_world(p)
    return p


def to_trajectory(seq: SkeletonSequence) -> Trajectory2D:
    return Trajectory2D(seq.hips[:, :2].copy(), seq.dt)


def to_local_pose(seq: SkeletonSequence) -> LocalPoseSequence:
    return LocalPoseSequence(seq.frames - seq.hips[:, None, :], seq.hip_index)


def from_local_pose(local: LocalPoseSequence, traj: Trajectory2D, hip_z) -> np.ndarray:
    """Inverse of :func:`to_local_pose`: add back hip xy from ``traj`` and hip height."""
    if len(local) != len(traj):
        raise InvalidArgument("local pose and trajectory lengths differ")
    hip_z = np.broadcast_to(np.asarray(hip_z, dtype=np.float64), (len(traj),))
    hips = np.concatenate([traj.points, hip_z[:, None]], axis=1)
    return local.frames + hips[:, None, :]


def heading_from_pose(joints) -> np.ndarray:
    """Body heading from the shoulder line; joints (..., J, 3) -> (...)."""
    joints = np.asarray(joints, dtype=np.float64)
    left = joints[..., L_SHOULDER, :2] - joints[..., R_SHOULDER, :2]
    return np.arctan2(-left[..., 0], left[..., 1])


def to_frame(seq: SkeletonSequence, frame: ActorFrame) -> SkeletonSequence:
    """Express all joints in ``frame`` (rotation about z, z unchanged)."""
    xy = frame.to_local(seq.frames[..., :2])
    return SkeletonSequence(np.concatenate([xy, seq.frames[..., 2:]], axis=-1), seq.hip_index, seq.dt)


def encode_trajectory_map(
    traj: Trajectory2D, geo, mode: str = "gaussian", sigma: float = DEFAULT_SIGMA
) -> HeatmapStack:
    """One channel per trajectory point.

    ``binary`` sets the nearest pixel to 1 (nothing if it falls outside);
    ``gaussian`` draws an unnormalized Gaussian with peak 1 at the sub-pixel center.
    """
    geo = geo if isinstance(geo, Georef) else Georef.of(geo)
    uv = world_to_pixel(traj.points, geo)
    return HeatmapStack(encode_pixels(uv, geo.height, geo.width, mode, sigma), geo)


def encode_pixels(uv, height: int, width: int, mode: str = "gaussian", sigma: float = DEFAULT_SIGMA) -> np.ndarray:
    """Array version of :func:`encode_trajectory_map`; uv (..., L, 2) -> (..., L, H, W)."""
    uv = np.asarray(uv, dtype=np.float64)
    lead = uv.shape[:-1]
    if mode == "binary":
        out = np.zeros(lead + (height, width))
        idx = np.floor(uv + 0.5).astype(np.int64)
        ok = (idx[..., 0] >= 0) & (idx[..., 0] < width) & (idx[..., 1] >= 0) & (idx[..., 1] < height)
        flat = out.reshape(-1, height, width)
        okf = ok.reshape(-1)
        idf = idx.reshape(-1, 2)
        rows = np.nonzero(okf)[0]
        flat[rows, idf[rows, 1], idf[rows, 0]] = 1.0
        return out
    if mode == "gaussian":
        if not sigma > 0:
            raise InvalidArgument("sigma must be positive")
        u = np.arange(width, dtype=np.float64)
        v = np.arange(height, dtype=np.float64)
        gu = np.exp(-((u - uv[..., 0:1]) ** 2) / (2 * sigma * sigma))
        gv = np.exp(-((v - uv[..., 1:2]) ** 2) / (2 * sigma * sigma))
        return gv[..., :, None] * gu[..., None, :]
    raise InvalidArgument(f"unknown encoding mode {mode!r}")


def soft_argmax(channel, beta: float = DEFAULT_BETA) -> np.ndarray:
    """Expected pixel (u, v) under softmax(beta * channel) over all pixels."""
    if not beta > 0:
        raise InvalidArgument("beta must be positive")
    m = np.asarray(channel, dtype=np.float64)
    if m.ndim != 2:
        raise InvalidArgument("soft_argmax expects a single H x W channel")
    z = beta * m
    z = z - np.max(z)
    p = np.exp(z)
    p /= p.sum()
    h, w = m.shape
    return np.array([np.sum(p.sum(axis=0) * np.arange(w)), np.sum(p.sum(axis=1) * np.arange(h))])


# episode logs -----------------------------------------------------------------

EPISODE_FORMAT = "followahead-episode"
EPISODE_VERSION = 1


def write_episode(path, times, frames, map_id: str) -> None:
    frames = np.asarray(frames, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write(json.dumps({"format": EPISODE_FORMAT, "version": EPISODE_VERSION}) + "\n")
        for t, joints in zip(times, frames):
            fh.write(json.dumps({"t": float(t), "joints": joints.tolist(), "map_id": map_id}) + "\n")


def read_episode(path):
    """Returns (times, frames (N, J, 3), map_ids)."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise InvalidArgument("empty episode log")
    head = json.loads(lines[0])
    if head.get("format") != EPISODE_FORMAT or head.get("version") != EPISODE_VERSION:
        raise InvalidArgument(f"unsupported episode header {head}")
    recs = [json.loads(line) for line in lines[1:] if line.strip()]
    times = np.array([r["t"] for r in recs], dtype=np.float64)
    frames = np.array([r["joints"] for r in recs], dtype=np.float64)
    return times, frames, [r["map_id"] for r in recs]


def angle_between(a, b):
    """Unsigned angle between two headings (radians)."""
    d = np.abs(np.asarray(a) - np.asarray(b)) % (2 * math.pi)
    return np.minimum(d, 2 * math.pi - d)
