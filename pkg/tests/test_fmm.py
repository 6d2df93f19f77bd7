import math

import networkx as nx
import numpy as np
import pytest

from src.fmm import CellState, UnreachableError, pairwise_lengths, solve_arrival, trace_path
from src.terrain import GeoPoint, TerrainError, great_circle_km, great_circle_matrix, Site, synthetic_grid

ORIGIN = GeoPoint(-0.6, 10.0)


def grid_dijkstra(grid, source_cell, target_cell) -> float:
    """8近傍（角の通過あり）のグリッド Dijkstra"""
    g = nx.Graph()
    for r in range(grid.n_rows):
        for c in range(grid.n_cols):
            if not grid.mask[r, c]:
                continue
            for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
                nb = (r + dr, c + dc)
                if grid.traversable(nb):
                    g.add_edge((r, c), nb, weight=great_circle_km(grid.cell_center(r, c), grid.cell_center(*nb)))
    return nx.dijkstra_path_length(g, source_cell, target_cell, weight="weight")


@pytest.fixture(scope="module")
def flat_field():
    grid = synthetic_grid(121, 121, origin=ORIGIN)
    return solve_arrival(grid, grid.cell_center(60, 60))


@pytest.fixture(scope="module")
def detour():
    # 列 60 の壁（行 0..69）を迂回させる
    r0, c_w, d = 30, 60, 40
    grid = synthetic_grid(121, 121, origin=ORIGIN, walls=[(slice(0, r0 + d), slice(c_w, c_w + 1))])
    source, target = (r0, c_w - d), (r0, c_w + d)
    field_ = solve_arrival(grid, grid.cell_center(*source))
    return grid, field_, source, target, grid_dijkstra(grid, source, target)


# ==================== 到達距離場 ====================

def test_source_cell_is_zero(flat_field):
    assert flat_field.at(flat_field.source_cell) == 0.0
    assert flat_field.source_cell == (60, 60)


def test_every_flat_cell_is_accepted(flat_field):
    assert np.all(np.isfinite(flat_field.arrival))
    assert np.all(flat_field.state == CellState.ACCEPTED)
    assert np.all(flat_field.arrival >= 0)


@pytest.mark.parametrize("cell", [(60, 120), (0, 60), (120, 120), (10, 5), (115, 2)])
def test_flat_grid_matches_great_circle(flat_field, cell):
    grid = flat_field.grid
    expected = great_circle_km(grid.cell_center(60, 60), grid.cell_center(*cell))
    assert flat_field.at(cell) == pytest.approx(expected, rel=0.02)


def test_arrival_non_decreasing_in_acceptance_order(flat_field):
    order = flat_field.accepted_order
    assert len(order) == 121 * 121
    assert all(a <= b for a, b in zip(order, order[1:]))


def test_refinement_reduces_error():
    target = GeoPoint(ORIGIN.lat + 1.1, ORIGIN.lon + 1.1)
    source = GeoPoint(ORIGIN.lat + 0.2, ORIGIN.lon + 0.2)
    errors = []
    for n, size in ((61, 0.02), (121, 0.01)):
        grid = synthetic_grid(n, n, origin=ORIGIN, cell_size=size)
        field_ = solve_arrival(grid, source)
        exact = great_circle_km(grid.cell_center(*grid.snap(source)), grid.cell_center(*grid.snap(target)))
        errors.append(abs(field_.at(grid.snap(target)) - exact))
    assert errors[1] < errors[0]


def test_masked_and_outside_source_rejected():
    grid = synthetic_grid(5, 5, walls=[(slice(2, 3), slice(2, 3))])
    with pytest.raises(TerrainError):
        solve_arrival(grid, grid.cell_center(2, 2))
    with pytest.raises(TerrainError):
        solve_arrival(grid, GeoPoint(5.0, 5.0))


def test_masked_cells_stay_infinite():
    grid = synthetic_grid(9, 9, walls=[(slice(0, 9), slice(4, 5))])
    field_ = solve_arrival(grid, grid.cell_center(4, 1))
    assert np.all(np.isinf(field_.arrival[:, 4]))
    assert np.all(np.isinf(field_.arrival[:, 5:]))
    assert np.all(np.isfinite(field_.arrival[:, :4]))


def test_detour_arrival_matches_grid_dijkstra(detour):
    grid, field_, source, target, oracle = detour
    straight = great_circle_km(grid.cell_center(*source), grid.cell_center(*target))
    assert oracle > straight * 1.3
    assert field_.at(target) == pytest.approx(oracle, rel=0.03)


# ==================== 逆追跡 ====================

def test_trace_to_source_is_a_single_point(flat_field):
    line = trace_path(flat_field, flat_field.source)
    assert line.total_length == 0.0
    assert len(line.points) == 1


def test_trace_along_parallel(flat_field):
    grid = flat_field.grid
    target = grid.cell_center(60, 115)
    line = trace_path(flat_field, target)
    expected = great_circle_km(flat_field.source, target)
    assert line.total_length == pytest.approx(expected, rel=0.02)
    assert line.points[0] == flat_field.source
    assert line.points[-1].lon == pytest.approx(target.lon)


def test_trace_polyline_descends_and_sums(flat_field):
    grid = flat_field.grid
    line = trace_path(flat_field, grid.cell_center(110, 20))
    arrivals = [flat_field.at(grid.snap(p)) for p in line.points]
    assert arrivals[0] == 0.0
    assert arrivals[-1] == max(arrivals)
    segments = math.fsum(great_circle_km(a, b) for a, b in zip(line.points, line.points[1:]))
    assert line.total_length == pytest.approx(segments, rel=1e-9)
    assert line.total_length == pytest.approx(flat_field.at((110, 20)), rel=0.03)


def test_trace_detour_matches_oracle(detour):
    grid, field_, _, target, oracle = detour
    line = trace_path(field_, grid.cell_center(*target))
    assert line.total_length == pytest.approx(oracle, rel=0.03)
    assert all(grid.traversable(grid.snap(p)) for p in line.points)


def test_trace_unreachable_target():
    grid = synthetic_grid(9, 9, walls=[(slice(0, 9), slice(4, 5))])
    field_ = solve_arrival(grid, grid.cell_center(4, 1))
    with pytest.raises(UnreachableError):
        trace_path(field_, grid.cell_center(4, 7))


def test_polyline_feature():
    grid = synthetic_grid(21, 21)
    field_ = solve_arrival(grid, grid.cell_center(10, 10))
    feature = trace_path(field_, grid.cell_center(10, 18)).to_feature({"i": "A"})
    assert feature["geometry"]["type"] == "LineString"
    assert feature["properties"]["i"] == "A"
    assert feature["geometry"]["coordinates"][0] == [grid.cell_center(10, 10).lon, grid.cell_center(10, 10).lat]


# ==================== サイト間行列 ====================

def test_pairwise_lengths_flat_three_sites():
    grid = synthetic_grid(81, 81, origin=ORIGIN)
    cells = [(5, 5), (5, 75), (70, 40)]
    points = [grid.cell_center(*c) for c in cells]
    matrix = pairwise_lengths(grid, points, labels=["A", "B", "C"])
    gc = great_circle_matrix([Site(label, label, p) for label, p in zip("ABC", points)])
    assert np.array_equal(matrix.lengths, matrix.lengths.T)
    assert np.all(np.diag(matrix.lengths) == 0.0)
    off = ~np.eye(3, dtype=bool)
    assert np.allclose(matrix.lengths[off], gc.lengths[off], rtol=0.02)
    assert set(matrix.paths) == {(0, 1), (0, 2), (1, 2)}
    assert matrix.method == "fmm"


def test_pairwise_lengths_coincident_sites():
    grid = synthetic_grid(11, 11)
    p = grid.cell_center(3, 3)
    with pytest.raises(TerrainError, match="coincident sites"):
        pairwise_lengths(grid, [p, GeoPoint(p.lat + 0.001, p.lon)])


def test_pairwise_lengths_site_on_land_is_named():
    grid = synthetic_grid(11, 11, walls=[(slice(0, 2), slice(0, 2))])
    with pytest.raises(TerrainError, match="site Lyon"):
        pairwise_lengths(grid, [grid.cell_center(1, 1), grid.cell_center(8, 8)], labels=["Lyon", "B"])


def test_pairwise_lengths_disconnected_sea():
    grid = synthetic_grid(11, 11, walls=[(slice(0, 11), slice(5, 6))])
    with pytest.raises(UnreachableError):
        pairwise_lengths(grid, [grid.cell_center(5, 1), grid.cell_center(5, 9)], with_paths=False)


def test_pairwise_lengths_workers_match_sequential():
    grid = synthetic_grid(31, 31, origin=ORIGIN)
    points = [grid.cell_center(2, 2), grid.cell_center(28, 3), grid.cell_center(15, 27)]
    sequential = pairwise_lengths(grid, points, with_paths=False)
    parallel = pairwise_lengths(grid, points, with_paths=False, workers=2)
    assert np.array_equal(sequential.lengths, parallel.lengths)


def test_pairwise_lengths_skips_last_source(monkeypatch):
    import src.fmm as fmm

    grid = synthetic_grid(31, 31, origin=ORIGIN)
    points = [grid.cell_center(2, 2), grid.cell_center(28, 3), grid.cell_center(15, 27)]
    solved = []

    def counting(grid_, point, radius_km=fmm.EARTH_RADIUS_KM):
        solved.append(point)
        return solve_arrival(grid_, point, radius_km)

    monkeypatch.setattr(fmm, "solve_arrival", counting)
    matrix = pairwise_lengths(grid, points, with_paths=False)
    assert solved == points[:2]
    assert np.all(matrix.lengths[~np.eye(3, dtype=bool)] > 0)
