"""Sliding-window dataset synthesis from scripted scenarios."""

from __future__ import annotations

import math

import numpy as np

from ..data import WindowDataset
from ..encoding import heading_from_pose
from ..errors import InvalidArgument
from ..geometry import ActorFrame
from ..gridworld import OccupancyGrid, extract_local_map, mask_to_fov
from .walker import Scenario, frame_times, walk

VISIBILITY = ("full", "partial", "unknown")
CAMERA_FOV = math.radians(87.0)
CAMERA_RANGE = 6.0


def window_count(duration: float, rate: float, N: int, T: int) -> int:
    return max(0, int(math.floor(duration * rate + 1e-9)) - (N + T) + 1)


def actor_frame(joints: np.ndarray) -> ActorFrame:
    return ActorFrame((joints[0, 0], joints[0, 1]), float(heading_from_pose(joints)))


def localize(frames: np.ndarray, frame: ActorFrame) -> np.ndarray:
    """Hip-relative joints (..., J, 3) with xy rotated into the actor frame."""
    rel = frames - frames[..., :1, :]
    out = rel.copy()
    out[..., :2] = frame.rotate_to_local(rel[..., :2])
    return out


def synthesize_dataset(scenarios: list[Scenario], N: int = 15, T: int = 15, rate: float = 5.0,
                       d_x: float = 2.5, d_y: float = 2.5, r_out: float = 0.125, stride: int = 1
                       ) -> WindowDataset:
    """Windows of N history plus T future frames, expressed in the last history frame.

    ``stride`` keeps every k-th window start (all windows by default).
    """
    if N < 1 or T < 1 or not rate > 0 or stride < 1:
        raise InvalidArgument("N, T, rate and stride must be positive")
    cols: dict[str, list] = {k: [] for k in ("occ", "p_hist", "p_fut", "pose_hist", "pose_fut", "hip_z",
                                             "frame", "scenario")}
    for sc in scenarios:
        times = frame_times(sc.duration, rate)
        if len(times) < N + T:
            continue
        frames = np.stack([walk(sc, float(t))[0] for t in times])
        for i in range(0, len(times) - (N + T) + 1, stride):
            hist, fut = frames[i : i + N], frames[i + N : i + N + T]
            fr = actor_frame(hist[-1])
            local = extract_local_map(sc.grid, fr, d_x, d_y, r_out)
            cols["occ"].append(local.cells)
            cols["p_hist"].append(fr.to_local(hist[:, 0, :2]))
            cols["p_fut"].append(fr.to_local(fut[:, 0, :2]))
            cols["pose_hist"].append(localize(hist, fr))
            cols["pose_fut"].append(localize(fut, fr))
            cols["hip_z"].append(hist[-1, 0, 2])
            cols["frame"].append([fr.position[0], fr.position[1], fr.heading])
            cols["scenario"].append(sc.seed)
    if not cols["occ"]:
        H, W = int(round(2 * d_y / r_out)), int(round(2 * d_x / r_out))
        return WindowDataset(np.zeros((0, H, W)), np.zeros((0, N, 2)), np.zeros((0, T, 2)),
                             np.zeros((0, N, 13, 3)), np.zeros((0, T, 13, 3)), np.zeros(0), np.zeros((0, 3)),
                             np.zeros(0, dtype=np.int64), r_out)
    arrays = {k: np.asarray(v) for k, v in cols.items()}
    arrays["scenario"] = arrays["scenario"].astype(np.int64)
    return WindowDataset(resolution=r_out, **arrays)


def apply_visibility(ds: WindowDataset, mode: str, fov: float = CAMERA_FOV, range_: float = CAMERA_RANGE
                     ) -> WindowDataset:
    """Map ablation: full maps, maps cut to the forward camera cone, or all-unknown maps."""
    if mode not in VISIBILITY:
        raise InvalidArgument(f"unknown visibility mode {mode!r}")
    if mode == "full" or len(ds) == 0:
        return ds
    if mode == "unknown":
        return ds.with_occ(np.full(ds.occ.shape, 0.5))
    H, W = ds.map_size
    origin = (-W * ds.resolution / 2, -H * ds.resolution / 2)
    occ = np.stack([mask_to_fov(OccupancyGrid(o, ds.resolution, origin), fov, range_).cells for o in ds.occ])
    return ds.with_occ(occ)


def split_by_scenario(ds: WindowDataset, fractions=(0.7, 0.15, 0.15), seed: int = 0):
    """(train, val, test) with whole scenarios kept together."""
    seeds = np.unique(ds.scenario)
    order = np.random.default_rng(seed).permutation(seeds)
    n = len(order)
    a = int(round(fractions[0] * n))
    b = a + int(round(fractions[1] * n))
    return ds.select_scenarios(order[:a]), ds.select_scenarios(order[a:b]), ds.select_scenarios(order[b:])
