"""
Cohesive-herding comparator.

Herders hold evenly spaced slots on an arc behind the targets' centre of mass,
which is pushed along an A* path from the centre of mass to the goal.  This
treats the targets as one flock, so it is effective only when they actually
stay together.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import distance_transform_edt
from scipy.optimize import linear_sum_assignment

from .errors import NoPath
from .geometry import ConvexPolygon, boundary_distance, norm
from .potentials import ObstacleField, force_from_separation

SQRT2 = math.sqrt(2.0)
_MOVES = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]


@dataclass(frozen=True)
class ArcHerdingParams:
    arc_radius: float = 2.5
    arc_span: float = np.pi / 2
    com_gain: float = 5.0
    grid_resolution: float = 1.0

    def __post_init__(self):
        if min(self.arc_radius, self.arc_span, self.com_gain, self.grid_resolution) <= 0:
            raise ValueError("arc herding parameters must be positive")
        if self.arc_span >= 2 * np.pi:
            raise ValueError("arc_span must be below 2 pi")


@dataclass
class OccupancyGrid:
    """Boolean occupancy indexed ``cells[ix, iy]``; cell centres at ``origin + (i + 0.5) * resolution``."""

    origin: np.ndarray
    resolution: float
    cells: np.ndarray
    _free_dist: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def cell_of(self, point) -> tuple[int, int]:
        """Cell containing ``point``, clamped to the grid."""
        nx, ny = self.cells.shape
        ix = math.floor((float(point[0]) - self.origin[0]) / self.resolution)
        iy = math.floor((float(point[1]) - self.origin[1]) / self.resolution)
        return min(max(ix, 0), nx - 1), min(max(iy, 0), ny - 1)

    def center(self, cell) -> np.ndarray:
        return self.origin + (np.asarray(cell, dtype=float) + 0.5) * self.resolution

    def is_free(self, cell) -> bool:
        return not bool(self.cells[cell[0], cell[1]])

    def free_at(self, points) -> np.ndarray:
        """Vectorised ``is_free(cell_of(p))`` over an ``(n, 2)`` array."""
        nx, ny = self.cells.shape
        idx = np.floor((np.asarray(points, dtype=float) - self.origin) / self.resolution)
        ix = np.clip(idx[:, 0], 0, nx - 1).astype(int)
        iy = np.clip(idx[:, 1], 0, ny - 1).astype(int)
        return ~self.cells[ix, iy]

    def nearest_free(self, point) -> tuple[int, int]:
        """Free cell whose centre is closest to ``point``; ties go to the smallest ``(ix, iy)``."""
        cell = self.cell_of(point)
        if self.is_free(cell):
            return cell
        if self._free_dist is None:
            if self.cells.all():
                raise NoPath("grid has no free cell")
            self._free_dist = distance_transform_edt(self.cells)
        # the answer is no farther from the point than the free cell nearest to
        # its own cell, so only a window around that cell needs scanning
        c = self.center(cell)
        offset = math.hypot(float(point[0]) - c[0], float(point[1]) - c[1]) / self.resolution
        reach = math.ceil(self._free_dist[cell] + 2.0 * offset) + 1
        nx, ny = self.cells.shape
        x0, y0 = max(cell[0] - reach, 0), max(cell[1] - reach, 0)
        window = self.cells[x0 : min(cell[0] + reach + 1, nx), y0 : min(cell[1] + reach + 1, ny)]
        free = np.argwhere(~window) + (x0, y0)
        centres = self.origin + (free + 0.5) * self.resolution
        k = int(np.argmin(norm(centres - np.asarray(point, dtype=float))))
        return int(free[k, 0]), int(free[k, 1])


def rasterize(obstacles, bounds, resolution: float, inflation: float = 0.0) -> OccupancyGrid:
    """Mark every cell whose centre lies in an obstacle grown by ``inflation``.

    ``bounds`` is ``(xmin, xmax, ymin, ymax)``.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    xmin, xmax, ymin, ymax = bounds
    nx = max(1, int(math.ceil((xmax - xmin) / resolution)))
    ny = max(1, int(math.ceil((ymax - ymin) / resolution)))
    origin = np.array([xmin, ymin], dtype=float)
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    centres = origin + (np.stack([ix, iy], axis=-1) + 0.5) * resolution
    cells = np.zeros((nx, ny), dtype=bool)
    for poly in obstacles:
        inside = poly.contains(centres, strict=False)
        if inflation > 0:
            inside |= boundary_distance(centres, poly) <= inflation
        cells |= inside
    return OccupancyGrid(origin, float(resolution), cells)


def octile(a, b) -> float:
    dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
    return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)


def neighbours(cells: np.ndarray, cell):
    """8-connected free neighbours with step costs; diagonals may not cut corners."""
    nx, ny = cells.shape
    x, y = cell
    for dx, dy in _MOVES:
        u, v = x + dx, y + dy
        if not (0 <= u < nx and 0 <= v < ny) or cells[u, v]:
            continue
        if dx and dy:
            if cells[x + dx, y] or cells[x, y + dy]:
                continue
            yield (u, v), SQRT2
        else:
            yield (u, v), 1.0


def astar_cells(grid: OccupancyGrid, start, goal) -> tuple[list[tuple[int, int]], float]:
    """Shortest 8-connected cell path and its cost in cell units."""
    start, goal = tuple(start), tuple(goal)
    if not (grid.is_free(start) and grid.is_free(goal)):
        raise NoPath("start or goal cell is occupied")
    cells = grid.cells
    g = {start: 0.0}
    parent = {}
    counter = 0
    heap = [(octile(start, goal), counter, start)]
    closed = set()
    while heap:
        _, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == goal:
            path = [cur]
            while cur in parent:
                cur = parent[cur]
                path.append(cur)
            return path[::-1], g[goal]
        closed.add(cur)
        gc = g[cur]
        for nb, step in neighbours(cells, cur):
            cand = gc + step
            if cand < g.get(nb, math.inf):
                g[nb] = cand
                parent[nb] = cur
                counter += 1
                heapq.heappush(heap, (cand + octile(nb, goal), counter, nb))
    raise NoPath(f"no path from {start} to {goal}")


def astar(grid: OccupancyGrid, start, goal) -> list[np.ndarray]:
    """Waypoints (cell centres) from the cell of ``start`` to the cell of ``goal``."""
    cells, _ = astar_cells(grid, grid.cell_of(start), grid.cell_of(goal))
    return [grid.center(c) for c in cells]


def arc_slots(com, push_dir, n: int, params: ArcHerdingParams) -> np.ndarray:
    """Evenly spaced slots on an arc behind ``com`` relative to ``push_dir``."""
    base = math.atan2(-push_dir[1], -push_dir[0])
    if n == 1:
        ang = np.array([base])
    else:
        ang = base + params.arc_span * (np.arange(n) / (n - 1) - 0.5)
    out = np.empty((n, 2))
    out[:, 0] = com[0] + params.arc_radius * np.cos(ang)
    out[:, 1] = com[1] + params.arc_radius * np.sin(ang)
    return out


def place_slots(com, push_dir, n: int, params: ArcHerdingParams, grid: OccupancyGrid | None = None) -> np.ndarray:
    """Arc slots, with any slot in an occupied cell moved to the nearest free cell centre."""
    slots = arc_slots(com, push_dir, n, params)
    if grid is not None:
        for k in np.flatnonzero(~grid.free_at(slots)):
            slots[k] = grid.center(grid.nearest_free(slots[k]))
    return slots


def current_waypoint(com, path, resolution: float) -> np.ndarray:
    """First waypoint farther than one cell from ``com``."""
    cx, cy = float(com[0]), float(com[1])
    for w in path:
        if math.hypot(w[0] - cx, w[1] - cy) > resolution:
            return w
    return path[-1] if path else np.zeros(2)


def _direction(dx: float, dy: float) -> np.ndarray | None:
    r = math.hypot(dx, dy)
    return np.array([dx / r, dy / r]) if r > 0.0 else None


def arc_herding_step(
    herders,
    targets,
    path,
    params: ArcHerdingParams,
    v_h: float,
    grid: OccupancyGrid | None = None,
    fields: list[ObstacleField] = (),
    seps=None,
) -> np.ndarray:
    """Velocity command for every herder (before unicycle conversion).

    Slots are matched to herders by minimum total distance.  ``seps``
    optionally supplies the herders' separations to each field.
    """
    herders = np.asarray(herders, dtype=float).reshape(-1, 2)
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    com = targets.mean(axis=0)
    wp = current_waypoint(com, path, params.grid_resolution)
    push = _direction(wp[0] - com[0], wp[1] - com[1])
    if push is None:
        push = _direction(-com[0], -com[1])
    if push is None:
        push = np.array([1.0, 0.0])
    slots = place_slots(com, push, len(herders), params, grid)
    diff = herders[:, None, :] - slots[None, :, :]
    rows, cols = linear_sum_assignment(np.hypot(diff[..., 0], diff[..., 1]))
    goal_of = np.empty_like(herders)
    goal_of[rows] = slots[cols]
    u = params.com_gain * (goal_of - herders)
    for k, f in enumerate(fields):
        s = f.separation(herders) if seps is None else seps[k]
        u = u + force_from_separation(s, f.k_o, f.lambda_o)
    r = np.hypot(u[:, 0], u[:, 1])
    over = r > v_h
    u[over] *= (v_h / r[over])[:, None]
    return u


class ArcHerdingPlanner:
    """Caches the A* path and replans only when the centre of mass changes cell."""

    def __init__(self, obstacles: list[ConvexPolygon], bounds, params: ArcHerdingParams, inflation: float):
        self.params = params
        self.grid = rasterize(obstacles, bounds, params.grid_resolution, inflation)
        self._cell = None
        self._path: list[np.ndarray] = []
        self.no_path_events = 0

    def path_for(self, com) -> list[np.ndarray]:
        cell = self.grid.cell_of(com)
        if cell != self._cell:
            self._cell = cell
            try:
                start = self.grid.nearest_free(com)
                goal = self.grid.nearest_free(np.zeros(2))
                cells, _ = astar_cells(self.grid, start, goal)
                self._path = [self.grid.center(c) for c in cells]
            except NoPath:
                self.no_path_events += 1
                self._path = [np.zeros(2)]
        return self._path
