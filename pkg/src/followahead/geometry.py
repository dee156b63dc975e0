"""Planar frames and angle helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def wrap_angle(a):
    """Map angles into (-pi, pi]. Works on scalars and arrays."""
    out = math.pi - np.remainder(math.pi - np.asarray(a, dtype=np.float64), 2.0 * math.pi)
    if np.ndim(out) == 0:
        return float(out)
    return out


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class ActorFrame:
    """Planar pose of the actor: position in world meters and heading in radians."""

    position: tuple[float, float]
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @classmethod
    def identity(cls) -> "ActorFrame":
        return cls((0.0, 0.0), 0.0)

    def to_world(self, pts) -> np.ndarray:
        """Frame coordinates (..., 2) -> world coordinates."""
        pts = np.asarray(pts, dtype=np.float64)
        return pts @ rotation(self.heading).T + np.asarray(self.position)

    def to_local(self, pts) -> np.ndarray:
        """World coordinates (..., 2) -> frame coordinates."""
        pts = np.asarray(pts, dtype=np.float64)
        return (pts - np.asarray(self.position)) @ rotation(self.heading)

    def rotate_to_local(self, vecs) -> np.ndarray:
        """Rotate direction vectors (..., 2) into the frame (no translation)."""
        return np.asarray(vecs, dtype=np.float64) @ rotation(self.heading)
