"""Full forecasting pipeline: local map, PathNet path, PoseNet poses."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import pathnet, posenet
from .control import HumanForecast
from .encoding import LocalPoseSequence, SkeletonSequence, Trajectory2D, encode_trajectory_map, heading_from_pose
from .errors import InvalidArgument
from .geometry import ActorFrame
from .gridworld import OccupancyGrid, extract_local_map, mask_to_fov, unknown_like

CAMERA_FOV = math.radians(87.0)
CAMERA_RANGE = 6.0


@dataclass
class Prediction:
    path: Trajectory2D            # world frame
    poses: SkeletonSequence       # world frame
    heatmaps: np.ndarray          # (T, H, W) in the actor frame
    frame: ActorFrame

    def forecast(self) -> HumanForecast:
        return HumanForecast(self.path.points, heading_from_pose(self.poses.frames))


def actor_frame_of(joints: np.ndarray, hip_index: int = 0) -> ActorFrame:
    return ActorFrame((joints[hip_index, 0], joints[hip_index, 1]), float(heading_from_pose(joints)))


def local_history(history: SkeletonSequence, frame: ActorFrame) -> np.ndarray:
    """Hip-relative joints with xy rotated into ``frame``."""
    rel = history.frames - history.hips[:, None, :]
    out = rel.copy()
    out[..., :2] = frame.rotate_to_local(rel[..., :2])
    return out


class FullPredictor:
    """PathNet then PoseNet, the latter fed with the predicted path."""

    def __init__(self, path_model: pathnet.PathNetModel, pose_model: posenet.PoseNetModel,
                 visibility: str = "full"):
        if path_model.config.T != pose_model.config.T or path_model.config.N != pose_model.config.N:
            raise InvalidArgument("PathNet and PoseNet horizons differ")
        self.path_model = path_model
        self.pose_model = pose_model
        self.visibility = visibility

    def local_map(self, grid: OccupancyGrid, frame: ActorFrame) -> OccupancyGrid:
        cfg = self.path_model.config
        local = extract_local_map(grid, frame, cfg.d_x, cfg.d_y, cfg.resolution)
        if self.visibility == "partial":
            local = mask_to_fov(local, CAMERA_FOV, CAMERA_RANGE)
        elif self.visibility == "unknown":
            local = unknown_like(local)
        elif self.visibility != "full":
            raise InvalidArgument(f"unknown visibility {self.visibility!r}")
        return local

    def predict(self, grid: OccupancyGrid, history: SkeletonSequence) -> Prediction:
        cfg = self.path_model.config
        if len(history) != cfg.N:
            raise InvalidArgument(f"need {cfg.N} history frames, got {len(history)}")
        frame = actor_frame_of(history.frames[-1], history.hip_index)
        local = self.local_map(grid, frame)
        hips = history.hips[:, :2]
        m_hist = encode_trajectory_map(Trajectory2D(hips, history.dt), cfg.georef(frame), "gaussian", cfg.sigma)
        p_hist = Trajectory2D(frame.to_local(hips), history.dt)
        m_hat, p_hat = pathnet.forward(self.path_model, local, m_hist, p_hist)
        # PoseNet works in the actor frame; rotate its local output back to the world
        p_local = Trajectory2D(frame.to_local(p_hat.points), history.dt)
        X_loc = LocalPoseSequence(local_history(history, frame), history.hip_index)
        hip_z = float(history.hips[-1, 2])
        out_local = posenet.forward(self.pose_model, X_loc, p_local, hip_z).frames
        rel = out_local - out_local[:, :1, :]
        rel[..., :2] = rel[..., :2] @ np.array([[math.cos(frame.heading), math.sin(frame.heading)],
                                                 [-math.sin(frame.heading), math.cos(frame.heading)]])
        world = posenet.compose(rel, p_hat.points, hip_z)
        return Prediction(p_hat, SkeletonSequence(world, history.hip_index, history.dt), m_hat.values, frame)
