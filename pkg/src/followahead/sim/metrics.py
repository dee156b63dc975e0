"""Forecast accuracy and follow-ahead quality metrics."""

from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidArgument
from ..geometry import wrap_angle
from ..gridworld import OccupancyGrid, raycast

DEFAULT_HORIZONS = (1.0, 1.5, 2.0, 3.0)
D_REF = 1.5


def horizon_steps(horizons, rate: float, T: int) -> list[int]:
    steps = [int(round(h * rate)) for h in horizons]
    for h, s in zip(horizons, steps):
        if s < 1 or s > T:
            raise InvalidArgument(f"horizon {h}s is {s} steps, outside 1..{T}")
    return steps


def eval_prediction(p_hat, p_gt, x_hat_local=None, x_gt_local=None, horizons=DEFAULT_HORIZONS,
                    rate: float = 5.0) -> dict:
    """Path error (hip, global) and local pose error (MPJPE of hip-relative joints), in millimeters.

    p_* are (S, T, 2); x_*_local are (S, T, J, 3). Means are over the listed horizons.
    """
    p_hat = np.asarray(p_hat, dtype=np.float64)
    p_gt = np.asarray(p_gt, dtype=np.float64)
    if p_hat.shape != p_gt.shape or p_hat.ndim != 3:
        raise InvalidArgument("path arrays must match and have shape (S, T, 2)")
    steps = horizon_steps(horizons, rate, p_hat.shape[1])
    path = 1000.0 * np.linalg.norm(p_hat - p_gt, axis=-1).mean(axis=0)
    out = {"horizons": list(horizons), "path": [float(path[s - 1]) for s in steps]}
    out["path_mean"] = float(np.mean(out["path"]))
    if x_hat_local is not None:
        xh = np.asarray(x_hat_local, dtype=np.float64)
        xg = np.asarray(x_gt_local, dtype=np.float64)
        if xh.shape != xg.shape:
            raise InvalidArgument("pose arrays must match")
        xh = xh - xh[..., :1, :]
        xg = xg - xg[..., :1, :]
        pose = 1000.0 * np.linalg.norm(xh - xg, axis=-1).mean(axis=(0, 2))
        out["pose"] = [float(pose[s - 1]) for s in steps]
        out["pose_mean"] = float(np.mean(out["pose"]))
    return out


def format_table(rows: dict, horizons=DEFAULT_HORIZONS, key: str = "path") -> str:
    """Plain-text table: one row per variant, columns for each horizon then the mean."""
    head = ["variant"] + [f"{h:g}s" for h in horizons] + ["mean"]
    lines = ["  ".join(f"{c:>10}" for c in head)]
    for name, res in rows.items():
        vals = res[key] + [res[key + "_mean"]]
        lines.append("  ".join([f"{name:>10}"] + [f"{v:10.1f}" for v in vals]))
    return "\n".join(lines)


def view_sample(grid: OccupancyGrid, robot, human_xy, human_heading: float, fov: float = math.radians(87.0),
                range_: float = 6.0, d_ref: float = D_REF):
    """(tracked, area proxy, normalized bearing) for one frame; robot is (x, y, theta)."""
    rx, ry, rth = (float(q) for q in robot)
    hx, hy = float(human_xy[0]), float(human_xy[1])
    d = math.hypot(hx - rx, hy - ry)
    bearing = wrap_angle(math.atan2(hy - ry, hx - rx) - (rth + math.pi)) if d > 0 else 0.0
    tracked = abs(bearing) <= fov / 2 and d <= range_ and raycast(grid, (rx, ry), (hx, hy))
    if not tracked:
        return False, 0.0, 1.0
    gamma = wrap_angle(math.atan2(ry - hy, rx - hx) - human_heading) if d > 0 else 0.0
    c = max(math.cos(gamma), 0.0) if d > 0 else 1.0
    # min(1, (d_ref / d)^2 c) without overflowing for tiny d
    area = 1.0 if c * d_ref**2 >= d**2 else c * (d_ref / d) ** 2
    return True, area, abs(bearing) / (fov / 2)


def eval_followahead(robots, humans, headings, grid: OccupancyGrid, fov: float = math.radians(87.0),
                     range_: float = 6.0, d_ref: float = D_REF) -> dict:
    """Tracking time is the fraction of frames with the person in view.

    Area proxy and distance are means over tracked frames. When nothing is
    tracked they are reported as the sentinels 0 and 1.
    """
    robots = np.asarray(robots, dtype=np.float64).reshape(-1, 3)
    if len(robots) == 0:
        raise InvalidArgument("empty log")
    samples = [view_sample(grid, r, h, hd, fov, range_, d_ref) for r, h, hd in zip(robots, humans, headings)]
    tracked = np.array([s[0] for s in samples])
    if not tracked.any():
        return {"area_proxy": 0.0, "tracking_time": 0.0, "distance": 1.0}
    area = np.array([s[1] for s in samples])[tracked]
    dist = np.array([s[2] for s in samples])[tracked]
    return {"area_proxy": float(area.mean()), "tracking_time": float(tracked.mean()), "distance": float(dist.mean())}
