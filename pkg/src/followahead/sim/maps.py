"""Procedural corridor-world maps and the centre-line routes through them."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import InvalidArgument
from ..gridworld import OccupancyGrid

KINDS = ("corridor", "L-turn", "T-junction", "open-room")


@dataclass(frozen=True)
class MapParams:
    """Geometry in meters. ``None`` fields are drawn from the seed.

    ``width`` is the corridor width, ``length`` the main arm, ``branch`` the
    side arm of L-turns and T-junctions. Open rooms use ``length`` by ``width``.
    """

    width: float | None = None
    length: float | None = None
    branch: float | None = None
    resolution: float = 0.1
    wall: float = 0.3
    clutter: int = 0


@dataclass(frozen=True)
class WorldMap:
    kind: str
    grid: OccupancyGrid
    params: MapParams
    # candidate walking routes as polylines of world waypoints
    routes: tuple[np.ndarray, ...]


def _resolve(kind: str, params: MapParams, rng: np.random.Generator) -> MapParams:
    width = params.width if params.width is not None else float(rng.uniform(1.6, 2.4))
    if kind == "open-room":
        length = params.length if params.length is not None else float(rng.uniform(8.0, 10.0))
        width = params.width if params.width is not None else float(rng.uniform(5.0, 7.0))
    else:
        length = params.length if params.length is not None else float(rng.uniform(6.0, 9.0))
    branch = params.branch if params.branch is not None else float(rng.uniform(3.5, 5.0))
    return replace(params, width=width, length=length, branch=branch)


def _cells(extent, r):
    return int(math.ceil(extent / r - 1e-9))


def generate_map(kind: str, params: MapParams = MapParams(), seed: int = 0) -> WorldMap:
    """Walls everywhere except the carved free space; deterministic in ``seed``.

    Free bands are whole cells: a corridor of width w spans ceil(w / r) rows.
    """
    if kind not in KINDS:
        raise InvalidArgument(f"unknown map kind {kind!r}; expected one of {KINDS}")
    rng = np.random.default_rng(seed)
    p = _resolve(kind, params, rng)
    r = p.resolution
    if not r > 0 or p.wall < 0:
        raise InvalidArgument("resolution must be positive and wall thickness non-negative")
    min_w = 1.0 if kind != "open-room" else 2.0
    if p.width < min_w or p.length < p.width or p.branch < 1.0:
        raise InvalidArgument(f"infeasible map parameters {p}")

    nw = _cells(p.width, r)
    nl = _cells(p.length, r)
    nb = _cells(p.branch, r)
    pad = _cells(p.wall, r)
    free_shape = (nw, nl) if kind in ("corridor", "open-room") else (nw + nb, nl)
    H, W = free_shape[0] + 2 * pad, free_shape[1] + 2 * pad
    cells = np.ones((H, W))
    # world origin sits on the first free cell of the main arm
    origin = (-pad * r, -pad * r)

    def carve(x0, x1, y0, y1):
        cells[pad + y0 : pad + y1, pad + x0 : pad + x1] = 0.0

    lm = nl * r
    yc = (nw - 1) * r / 2  # centre line of the main arm
    routes: list[np.ndarray] = []
    if kind in ("corridor", "open-room"):
        carve(0, nl, 0, nw)
        margin = min(0.5, lm / 4)
        routes.append(np.array([[margin, yc], [lm - r - margin, yc]]))
        if kind == "open-room" and p.clutter:
            _add_clutter(cells, pad, nw, nl, p.clutter, rng, yc / r)
    elif kind == "L-turn":
        carve(0, nl, 0, nw)
        carve(nl - nw, nl, nw, nw + nb)
        xc = lm - r - (nw - 1) * r / 2
        top = (nw + nb - 1) * r - 0.5
        routes.append(np.array([[0.5, yc], [xc, yc], [xc, top]]))
        routes.append(routes[0][::-1].copy())
    else:
        carve(0, nl, 0, nw)
        c0 = (nl - nw) // 2
        carve(c0, c0 + nw, nw, nw + nb)
        xc = (c0 + (nw - 1) / 2) * r
        top = (nw + nb - 1) * r - 0.5
        left, right = [0.5, yc], [lm - r - 0.5, yc]
        mid = [xc, yc]
        branch = [xc, top]
        routes += [np.array(x) for x in ([left, mid, branch], [right, mid, branch], [branch, mid, left],
                                         [branch, mid, right], [left, mid, right])]
    grid = OccupancyGrid(cells, r, origin)
    return WorldMap(kind, grid, p, tuple(routes))


def _add_clutter(cells, pad, nw, nl, count, rng, yc_cells):
    """Small square pillars away from the centre line."""
    for _ in range(count):
        s = int(rng.integers(2, 5))
        x = int(rng.integers(0, max(1, nl - s)))
        above = bool(rng.integers(0, 2))
        lo, hi = (int(yc_cells) + 6, nw - s) if above else (0, int(yc_cells) - 6 - s)
        if hi <= lo:
            continue
        y = int(rng.integers(lo, hi))
        cells[pad + y : pad + y + s, pad + x : pad + x + s] = 1.0


def free_band_rows(grid: OccupancyGrid, column: int) -> int:
    """Number of free cells in one pixel column."""
    return int(np.sum(grid.cells[:, column] <= 0.5))


def is_connected(grid: OccupancyGrid) -> bool:
    """Four-connected flood fill over free cells."""
    free = grid.cells <= 0.5
    total = int(free.sum())
    if total == 0:
        return False
    seen = np.zeros_like(free)
    start = tuple(np.argwhere(free)[0])
    stack = [start]
    seen[start] = True
    count = 0
    H, W = free.shape
    while stack:
        v, u = stack.pop()
        count += 1
        for dv, du in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = v + dv, u + du
            if 0 <= a < H and 0 <= b < W and free[a, b] and not seen[a, b]:
                seen[a, b] = True
                stack.append((a, b))
    return count == total
