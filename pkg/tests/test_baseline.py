import math

import numpy as np
import pytest
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from shepherding.baseline import (
    SQRT2,
    ArcHerdingParams,
    ArcHerdingPlanner,
    OccupancyGrid,
    arc_herding_step,
    arc_slots,
    astar,
    astar_cells,
    current_waypoint,
    octile,
    place_slots,
    rasterize,
)
from shepherding.engine import run
from shepherding.errors import NoPath
from shepherding.geometry import ConvexPolygon
from shepherding.scenario import config_from_text


def grid_of(cells):
    return OccupancyGrid(np.zeros(2), 1.0, np.asarray(cells, dtype=bool))


def dijkstra_cost(cells, start, goal):
    """Independent shortest path on the same 8-connected, no-corner-cutting graph."""
    nx, ny = cells.shape
    free = ~cells
    rows, cols, weights = [], [], []
    ids = np.arange(nx * ny).reshape(nx, ny)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if (dx, dy) == (0, 0):
                continue
            xs = slice(max(0, -dx), nx - max(0, dx))
            ys = slice(max(0, -dy), ny - max(0, dy))
            xd = slice(max(0, dx), nx - max(0, -dx))
            yd = slice(max(0, dy), ny - max(0, -dy))
            ok = free[xs, ys] & free[xd, yd]
            if dx and dy:
                # both side cells must be free as well
                ok &= free[xd, ys] & free[xs, yd]
            rows.append(ids[xs, ys][ok])
            cols.append(ids[xd, yd][ok])
            weights.append(np.full(ok.sum(), SQRT2 if dx and dy else 1.0))
    graph = coo_matrix((np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))), shape=(nx * ny,) * 2)
    dist = dijkstra(graph.tocsr(), indices=ids[start])
    return dist[ids[goal]]


def lattice_cost(path):
    straight = sum(1 for a, b in zip(path, path[1:]) if abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1)
    return straight, len(path) - 1 - straight


def test_rasterize_empty_scene_is_free():
    g = rasterize([], (-10, 10, -10, 10), 1.0)
    assert g.shape == (20, 20) and not g.cells.any()


def test_rasterize_marks_cells_inside_rectangle():
    g = rasterize([ConvexPolygon.rectangle((0.5, 0.5), 3, 3)], (-10, 10, -10, 10), 1.0)
    assert not g.is_free(g.cell_of((0.5, 0.5)))
    assert g.is_free(g.cell_of((8.5, 8.5)))


@pytest.mark.parametrize("inflation", [0.0, 1.0, 2.5])
def test_rasterized_area_matches_inflated_rectangle(inflation):
    res = 0.25
    w, h = 12.0, 5.0
    poly = ConvexPolygon.rectangle((1.3, -0.7), w, h, 0.4)
    g = rasterize([poly], (-20, 20, -20, 20), res, inflation)
    area = g.cells.sum() * res * res
    exact = w * h + 2 * (w + h) * inflation + math.pi * inflation**2
    perimeter = 2 * (w + h) + 2 * math.pi * inflation
    assert abs(area - exact) <= 2 * res * perimeter


def test_nearest_free_matches_full_scan():
    rng = np.random.default_rng(11)
    for _ in range(300):
        cells = rng.uniform(size=(30, 25)) < rng.uniform(0.3, 0.97)
        if cells.all():
            continue
        g = OccupancyGrid(np.array([-3.0, 2.0]), 0.5, cells)
        point = rng.uniform([-6, -1], [15, 17])  # partly outside the grid
        free = np.argwhere(~cells)
        centres = g.origin + (free + 0.5) * g.resolution
        k = int(np.argmin(np.hypot(*(centres - point).T)))
        assert g.nearest_free(point) == tuple(free[k])


def test_free_at_agrees_with_cell_lookup():
    rng = np.random.default_rng(12)
    g = OccupancyGrid(np.array([-3.0, 2.0]), 0.5, rng.uniform(size=(30, 25)) < 0.4)
    pts = rng.uniform([-6, -1], [15, 17], (500, 2))
    assert list(g.free_at(pts)) == [g.is_free(g.cell_of(p)) for p in pts]


def test_nearest_free_on_full_grid_raises():
    with pytest.raises(NoPath):
        grid_of(np.ones((4, 4))).nearest_free((1.5, 1.5))


def test_astar_start_equals_goal():
    g = grid_of(np.zeros((5, 5)))
    cells, cost = astar_cells(g, (2, 2), (2, 2))
    assert cells == [(2, 2)] and cost == 0.0
    assert len(astar(g, (2.5, 2.5), (2.2, 2.9))) == 1


def test_astar_open_grid_cost_is_octile():
    g = grid_of(np.zeros((30, 30)))
    cells, cost = astar_cells(g, (1, 2), (25, 9))
    assert cost == pytest.approx(octile((1, 2), (25, 9)))
    assert lattice_cost(cells) == (24 - 7, 7)


def test_astar_unreachable_goal_raises():
    cells = np.zeros((7, 7), dtype=bool)
    cells[3, :] = True
    with pytest.raises(NoPath):
        astar_cells(grid_of(cells), (0, 0), (6, 6))


def test_astar_matches_dijkstra_on_random_grids():
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 200:
        cells = rng.uniform(size=(64, 64)) < rng.uniform(0.1, 0.35)
        free = np.argwhere(~cells)
        s, t = (tuple(int(v) for v in free[k]) for k in rng.choice(len(free), 2, replace=False))
        oracle = dijkstra_cost(cells, s, t)
        if not np.isfinite(oracle):
            with pytest.raises(NoPath):
                astar_cells(grid_of(cells), s, t)
        else:
            path, cost = astar_cells(grid_of(cells), s, t)
            straight, diagonal = lattice_cost(path)
            # costs are a + b*sqrt(2) with integer a, b; distinct values differ far more than 1e-9
            assert abs(cost - oracle) < 1e-9
            assert abs(straight + diagonal * SQRT2 - oracle) < 1e-9
        checked += 1


def test_single_slot_is_directly_behind():
    slots = arc_slots(np.array([10.0, 5.0]), np.array([0.0, 1.0]), 1, ArcHerdingParams())
    assert slots[0] == pytest.approx([10.0, 2.5])


def test_two_slots_mirror_about_push_axis():
    com, push = np.array([3.0, -2.0]), np.array([1.0, 0.0])
    s = arc_slots(com, push, 2, ArcHerdingParams())
    assert s[0, 0] == pytest.approx(s[1, 0])
    assert s[0, 1] - com[1] == pytest.approx(-(s[1, 1] - com[1]))


def test_three_slots_polar_placement():
    p = ArcHerdingParams(arc_radius=2.0, arc_span=math.pi / 3)
    s = arc_slots(np.zeros(2), np.array([1.0, 0.0]), 3, p)
    angles = [math.pi - math.pi / 6, math.pi, math.pi + math.pi / 6]
    expected = [(2 * math.cos(a), 2 * math.sin(a)) for a in angles]
    assert s == pytest.approx(np.array(expected))


def test_current_waypoint_skips_reached_points():
    path = [np.array([0.0, 0.0]), np.array([0.5, 0.0]), np.array([3.0, 0.0])]
    assert current_waypoint(np.array([0.0, 0.0]), path, 1.0) == pytest.approx([3.0, 0.0])


def test_slots_never_inside_obstacles():
    poly = ConvexPolygon.rectangle((0.0, 0.0), 6.0, 6.0)
    params = ArcHerdingParams()
    grid = rasterize([poly], (-40, 40, -40, 40), params.grid_resolution, 0.5)
    rng = np.random.default_rng(4)
    moved = 0
    for _ in range(300):
        com = rng.uniform(-8, 8, 2)
        push = rng.normal(size=2)
        slots = place_slots(com, push / np.linalg.norm(push), 4, params, grid)
        moved += int(np.any(slots != arc_slots(com, push / np.linalg.norm(push), 4, params)))
        assert not np.any(poly.contains(slots, strict=False))
    assert moved > 0  # the fallback was exercised


def test_commands_respect_speed_limit():
    poly = ConvexPolygon.rectangle((0.0, 0.0), 6.0, 6.0)
    params = ArcHerdingParams()
    planner = ArcHerdingPlanner([poly], (-40, 40, -40, 40), params, inflation=0.5)
    rng = np.random.default_rng(5)
    for _ in range(50):
        targets = rng.uniform(-8, 8, (6, 2))
        herders = rng.uniform(-15, 15, (3, 2))
        path = planner.path_for(targets.mean(axis=0))
        u = arc_herding_step(herders, targets, path, params, 7.5, planner.grid)
        assert np.all(np.hypot(u[:, 0], u[:, 1]) <= 7.5 + 1e-12)


def test_parameters_validated():
    with pytest.raises(ValueError):
        ArcHerdingParams(arc_span=7.0)
    with pytest.raises(ValueError):
        ArcHerdingParams(com_gain=0.0)


def test_baseline_herds_cohesive_targets():
    """With an artificial flocking term the comparator does its job."""

    def cohesion(targets, herders):
        return 2.0 * (targets.mean(axis=0) - targets)

    for seed in range(4):
        cfg = config_from_text(
            "", mode="baseline",
            overrides=["n_herders=5", "n_targets=10", "t_max=300", "diffusion=0.05", f"seed={seed}"],
        )
        _, metrics = run(cfg, target_hook=cohesion)
        assert metrics.hold_reached and metrics.final_chi == 1.0
