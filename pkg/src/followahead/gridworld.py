"""Occupancy grids, local-map extraction, visibility masking and ray queries.

Pixel convention: cell ``(u, v)`` is stored at ``cells[v, u]``; its center sits at
``origin + resolution * (u, v)`` in the grid's frame. A grid without a frame lives
in world coordinates; local maps carry the :class:`ActorFrame` they were cut in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import InvalidArgument
from .geometry import ActorFrame

FREE = 0.0
OCCUPIED = 1.0
UNKNOWN = 0.5

_CHARS = {FREE: ".", OCCUPIED: "#", UNKNOWN: "?"}
_VALUES = {v: k for k, v in _CHARS.items()}
MAGIC = "P-OCC"


def _nearest(x):
    # half-up rounding, identical for scalars and arrays
    return np.floor(np.asarray(x) + 0.5).astype(np.int64)


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    cells: np.ndarray
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)
    frame: ActorFrame | None = field(default=None)

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.float64)
        if cells.ndim != 2 or cells.shape[0] < 1 or cells.shape[1] < 1:
            raise InvalidArgument(f"cells must be a non-empty 2D array, got shape {cells.shape}")
        if not self.resolution > 0:
            raise InvalidArgument("resolution must be positive")
        if not np.all((cells >= 0.0) & (cells <= 1.0)):
            raise InvalidArgument("cell values must lie in [0, 1]")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "resolution", float(self.resolution))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (
            self.resolution == other.resolution
            and self.origin == other.origin
            and self.frame == other.frame
            and np.array_equal(self.cells, other.cells)
        )

    def with_cells(self, cells) -> "OccupancyGrid":
        return OccupancyGrid(cells, self.resolution, self.origin, self.frame)

    # coordinate conversions -------------------------------------------------

    def world_to_frame(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return pts if self.frame is None else self.frame.to_local(pts)

    def frame_to_world(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return pts if self.frame is None else self.frame.to_world(pts)

    def world_to_pixel(self, pts) -> np.ndarray:
        """World meters -> real-valued pixel coordinates (u, v)."""
        return (self.world_to_frame(pts) - np.asarray(self.origin)) / self.resolution

    def pixel_to_world(self, uv) -> np.ndarray:
        uv = np.asarray(uv, dtype=np.float64)
        return self.frame_to_world(np.asarray(self.origin) + self.resolution * uv)

    def in_bounds(self, iu, iv):
        return (iu >= 0) & (iu < self.width) & (iv >= 0) & (iv < self.height)

    def value_at(self, iu, iv, outside: float = OCCUPIED):
        """Cell values at integer indices; out-of-bounds cells read as ``outside``."""
        iu = np.asarray(iu)
        iv = np.asarray(iv)
        inside = self.in_bounds(iu, iv)
        out = np.full(np.broadcast(iu, iv).shape, outside, dtype=np.float64)
        out[inside] = self.cells[np.broadcast_to(iv, out.shape)[inside], np.broadcast_to(iu, out.shape)[inside]]
        return out

    def sample_nearest(self, world_pts) -> np.ndarray:
        uv = _nearest(self.world_to_pixel(world_pts))
        return self.value_at(uv[..., 0], uv[..., 1])

    def occupied(self) -> np.ndarray:
        return self.cells > 0.5


def empty_grid(width: int, height: int, resolution: float, origin=(0.0, 0.0)) -> OccupancyGrid:
    return OccupancyGrid(np.zeros((height, width)), resolution, origin)


def extract_local_map(
    grid: OccupancyGrid, frame: ActorFrame, d_x: float, d_y: float, r_out: float
) -> OccupancyGrid:
    """Cut a (2 d_x / r_out) x (2 d_y / r_out) map centered on ``frame``, axis-aligned with it.

    Cells are sampled by nearest neighbor; samples falling outside ``grid`` are occupied.
    """
    if not (d_x > 0 and d_y > 0 and r_out > 0):
        raise InvalidArgument("d_x, d_y and r_out must be positive")
    w = int(round(2 * d_x / r_out))
    h = int(round(2 * d_y / r_out))
    if w < 1 or h < 1:
        raise InvalidArgument("local map would be empty")
    origin = (-float(d_x), -float(d_y))
    u, v = np.meshgrid(np.arange(w), np.arange(h))
    local_pts = np.stack([origin[0] + r_out * u, origin[1] + r_out * v], axis=-1)
    cells = grid.sample_nearest(frame.to_world(local_pts))
    return OccupancyGrid(cells, r_out, origin, frame)


def traverse(a, b) -> Iterator[tuple[int, int]]:
    """Cells of a unit grid (cell (i, j) = [i, i+1) x [j, j+1)) crossed by segment a-b.

    Amanatides-Woo stepping. Exact corner crossings yield both side cells.
    """
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    ix, iy = math.floor(ax), math.floor(ay)
    ex, ey = math.floor(bx), math.floor(by)
    dx, dy = bx - ax, by - ay
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    if dx != 0:
        tdx = abs(1.0 / dx)
        tmx = ((ix + 1 - ax) if dx > 0 else (ax - ix)) * tdx
    else:
        tdx = tmx = math.inf
    if dy != 0:
        tdy = abs(1.0 / dy)
        tmy = ((iy + 1 - ay) if dy > 0 else (ay - iy)) * tdy
    else:
        tdy = tmy = math.inf
    yield ix, iy
    while (ix, iy) != (ex, ey):
        if tmx < tmy:
            if tmx > 1.0:
                break
            ix += sx
            tmx += tdx
        elif tmy < tmx:
            if tmy > 1.0:
                break
            iy += sy
            tmy += tdy
        else:
            if tmx > 1.0:
                break
            yield ix + sx, iy
            yield ix, iy + sy
            ix += sx
            iy += sy
            tmx += tdx
            tmy += tdy
        yield ix, iy


def _segment_cells(grid: OccupancyGrid, a_world, b_world) -> list[tuple[int, int]]:
    qa = grid.world_to_pixel(a_world) + 0.5
    qb = grid.world_to_pixel(b_world) + 0.5
    # canonical order keeps raycast(a, b) == raycast(b, a)
    if (qb[0], qb[1]) < (qa[0], qa[1]):
        qa, qb = qb, qa
    return list(traverse(qa, qb))


def raycast(grid: OccupancyGrid, start, end) -> bool:
    """True iff the segment start-end crosses no occupied (or out-of-bounds) cell."""
    start = np.asarray(start, dtype=np.float64)
    end = np.asarray(end, dtype=np.float64)
    if not (np.all(np.isfinite(start)) and np.all(np.isfinite(end))):
        raise InvalidArgument("raycast endpoints must be finite")
    for iu, iv in _segment_cells(grid, start, end):
        if not (0 <= iu < grid.width and 0 <= iv < grid.height):
            return False
        if grid.cells[iv, iu] > 0.5:
            return False
    return True


def mask_to_fov(local: OccupancyGrid, fov: float, range_: float) -> OccupancyGrid:
    """Replace cells the actor cannot see with UNKNOWN.

    A cell stays if it lies in the forward cone of half-angle fov/2, within
    ``range_`` of the actor, and no occupied cell sits strictly between the
    actor cell and it.
    """
    if not (0 < fov <= 2 * math.pi + 1e-12) or not range_ > 0:
        raise InvalidArgument("need 0 < fov <= 2*pi and range > 0")
    actor_uv = (np.zeros(2) - np.asarray(local.origin)) / local.resolution
    cu, cv = (int(x) for x in _nearest(actor_uv))
    occ = local.cells > 0.5
    out = local.cells.copy()
    half = fov / 2.0
    full_circle = fov >= 2 * math.pi - 1e-12
    q0 = actor_uv + 0.5
    for v in range(local.height):
        for u in range(local.width):
            if (u, v) == (cu, cv):
                continue
            x = local.origin[0] + local.resolution * u
            y = local.origin[1] + local.resolution * v
            if math.hypot(x, y) > range_ or (not full_circle and abs(math.atan2(y, x)) > half + 1e-12):
                out[v, u] = UNKNOWN
                continue
            for iu, iv in traverse(q0, (u + 0.5, v + 0.5)):
                if (iu, iv) == (u, v) or (iu, iv) == (cu, cv):
                    continue
                if not (0 <= iu < local.width and 0 <= iv < local.height) or occ[iv, iu]:
                    out[v, u] = UNKNOWN
                    break
    return local.with_cells(out)


def unknown_like(local: OccupancyGrid) -> OccupancyGrid:
    return local.with_cells(np.full(local.shape, UNKNOWN))


def collision_mask(grid: OccupancyGrid, pts, inflation: float) -> np.ndarray:
    """Vectorized :func:`is_collision` over points of shape (..., 2)."""
    if inflation < 0:
        raise InvalidArgument("inflation must be non-negative")
    pts = np.asarray(pts, dtype=np.float64)
    uv = grid.world_to_pixel(pts)
    base = _nearest(uv)
    hit = grid.value_at(base[..., 0], base[..., 1]) > 0.5
    reach = int(math.ceil(inflation / grid.resolution)) + 1 if inflation > 0 else 0
    if reach:
        fl = np.floor(uv).astype(np.int64)
        r = grid.resolution
        for du in range(-reach, reach + 2):
            for dv in range(-reach, reach + 2):
                iu = fl[..., 0] + du
                iv = fl[..., 1] + dv
                dist2 = ((iu - uv[..., 0]) * r) ** 2 + ((iv - uv[..., 1]) * r) ** 2
                near = dist2 <= inflation * inflation
                if np.any(near):
                    hit |= near & (grid.value_at(iu, iv) > 0.5)
    return hit


def is_collision(grid: OccupancyGrid, p, inflation: float = 0.0) -> bool:
    """True iff p's own cell or any cell centered within ``inflation`` of p is occupied.

    Points and cells outside the grid count as occupied.
    """
    return bool(collision_mask(grid, np.asarray(p, dtype=np.float64)[None, :], inflation)[0])


# map file format --------------------------------------------------------------


def format_map(grid: OccupancyGrid) -> str:
    lines = [f"{MAGIC} {grid.width} {grid.height} {grid.resolution!r} {grid.origin[0]!r} {grid.origin[1]!r}"]
    for row in grid.cells:
        try:
            lines.append("".join(_CHARS[float(c)] for c in row))
        except KeyError as exc:
            raise InvalidArgument("map files hold only free/occupied/unknown cells") from exc
    return "\n".join(lines) + "\n"


def parse_map(text: str) -> OccupancyGrid:
    lines = text.splitlines()
    if not lines:
        raise InvalidArgument("empty map file")
    head = lines[0].split()
    if len(head) != 6 or head[0] != MAGIC:
        raise InvalidArgument(f"bad map header: {lines[0]!r}")
    w, h = int(head[1]), int(head[2])
    res, ox, oy = float(head[3]), float(head[4]), float(head[5])
    rows = lines[1 : 1 + h]
    if len(rows) != h or any(len(r) != w for r in rows):
        raise InvalidArgument("map body does not match header size")
    try:
        cells = np.array([[_VALUES[c] for c in r] for r in rows], dtype=np.float64)
    except KeyError as exc:
        raise InvalidArgument(f"unknown map character {exc}") from exc
    return OccupancyGrid(cells, res, (ox, oy))


def write_map(grid: OccupancyGrid, path) -> None:
    Path(path).write_text(format_map(grid))


def read_map(path) -> OccupancyGrid:
    return parse_map(Path(path).read_text())
