"""
Fast Marching Module
アイコナール方程式を解いて海底ケーブルの最短経路長を求める（長さのみのコスト）
"""

import heapq
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

import numpy as np

from .netmodel import CostMatrix
from .terrain import EARTH_RADIUS_KM, Cell, GeoPoint, TerrainError, TerrainGrid, great_circle_km

logger = logging.getLogger(__name__)

# ソース近傍を厳密距離で初期化するセル半径
DEFAULT_INIT_RADIUS = 5


class UnreachableError(ValueError):
    """到達不能なターゲット・サイト対"""


class CellState(IntEnum):
    """FMM のセル状態"""
    FAR = 0
    NARROW = 1
    ACCEPTED = 2


@dataclass(eq=False)
class ArrivalField:
    """1つのソースからの到達距離場（km）"""
    grid: TerrainGrid
    source: GeoPoint
    source_cell: Cell
    arrival: np.ndarray
    state: np.ndarray
    accepted_order: list[float] = field(default_factory=list)
    radius_km: float = EARTH_RADIUS_KM

    def at(self, cell: Cell) -> float:
        return float(self.arrival[cell])


@dataclass(frozen=True)
class GeoPolyline:
    """ケーブル経路のポリライン"""
    points: tuple[GeoPoint, ...]
    total_length: float

    def to_feature(self, properties: Optional[dict] = None) -> dict:
        """GeoJSON LineString Feature"""
        coords = [p.lonlat() for p in self.points]
        if len(coords) == 1:
            coords = coords * 2
        return {
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": coords},
            "properties": {"length_km": self.total_length, **(properties or {})},
        }


# ==================== 到達距離場 ====================

def solve_arrival(
    grid: TerrainGrid,
    source: GeoPoint,
    radius_km: float = EARTH_RADIUS_KM,
    init_radius: int = DEFAULT_INIT_RADIUS,
) -> ArrivalField:
    """一次風上差分・4近傍の Fast Marching で到達距離場を計算

    曲面計量は軸ごとのステップ長（標高差込み）として更新式に入る。
    ヒープのタイは平坦化したセル番号で決まる。
    """
    src = grid.snap(source)
    if not grid.mask[src]:
        raise TerrainError(f"source ({source.lat}, {source.lon}) lies on a masked cell")

    n_rows, n_cols = grid.n_rows, grid.n_cols
    ns, ew = grid.axis_steps_km(radius_km)
    # 平坦リストの方が numpy スカラー参照より速い
    ns_len = np.full((n_rows, n_cols), np.inf)
    ns_len[:-1, :] = ns
    ew_len = np.full((n_rows, n_cols), np.inf)
    ew_len[:, :-1] = ew
    north = ns_len.ravel().tolist()
    east = ew_len.ravel().tolist()
    traversable = grid.mask.ravel().tolist()

    size = n_rows * n_cols
    inf = math.inf
    T = [inf] * size
    state = [CellState.FAR] * size
    fixed = [False] * size
    heap: list[tuple[float, int]] = []

    for cell, value in _initial_band(grid, src, radius_km, init_radius):
        idx = cell[0] * n_cols + cell[1]
        T[idx] = value
        fixed[idx] = True
        state[idx] = CellState.NARROW
        heapq.heappush(heap, (value, idx))

    accepted_order: list[float] = []

    def axis_pair(lo: int, lo_step: float, hi: int, hi_step: float):
        best_t, best_h = inf, inf
        if lo >= 0 and state[lo] == CellState.ACCEPTED and T[lo] + lo_step < best_t + best_h:
            best_t, best_h = T[lo], lo_step
        if hi >= 0 and state[hi] == CellState.ACCEPTED and T[hi] + hi_step < best_t + best_h:
            best_t, best_h = T[hi], hi_step
        return best_t, best_h

    def update(idx: int) -> float:
        r, c = divmod(idx, n_cols)
        s = idx - n_cols if r > 0 else -1
        n = idx + n_cols if r < n_rows - 1 else -1
        w = idx - 1 if c > 0 else -1
        e = idx + 1 if c < n_cols - 1 else -1
        ty, hy = axis_pair(s, north[s] if s >= 0 else inf, n, north[idx])
        tx, hx = axis_pair(w, east[w] if w >= 0 else inf, e, east[idx])
        if ty == inf and tx == inf:
            return inf
        if ty == inf:
            return tx + hx
        if tx == inf:
            return ty + hy
        # ((T-tx)/hx)^2 + ((T-ty)/hy)^2 = 1
        ax, ay = 1.0 / (hx * hx), 1.0 / (hy * hy)
        a = ax + ay
        b = -2.0 * (tx * ax + ty * ay)
        cc = tx * tx * ax + ty * ty * ay - 1.0
        disc = b * b - 4.0 * a * cc
        if disc >= 0.0:
            t = (-b + math.sqrt(disc)) / (2.0 * a)
            if t >= max(tx, ty):
                return t
        return min(tx + hx, ty + hy)

    while heap:
        value, idx = heapq.heappop(heap)
        if state[idx] == CellState.ACCEPTED or value > T[idx]:
            continue
        state[idx] = CellState.ACCEPTED
        accepted_order.append(value)
        r, c = divmod(idx, n_cols)
        for nb, ok in (
            (idx - n_cols, r > 0),
            (idx + n_cols, r < n_rows - 1),
            (idx - 1, c > 0),
            (idx + 1, c < n_cols - 1),
        ):
            if not ok or not traversable[nb] or fixed[nb] or state[nb] == CellState.ACCEPTED:
                continue
            t = update(nb)
            if t < T[nb]:
                T[nb] = t
                state[nb] = CellState.NARROW
                heapq.heappush(heap, (t, nb))

    arrival = np.array(T, dtype=float).reshape(n_rows, n_cols)
    states = np.array(state, dtype=np.int8).reshape(n_rows, n_cols)
    logger.debug("[FMM] source %s: %d cells accepted", src, len(accepted_order))
    return ArrivalField(
        grid=grid,
        source=grid.cell_center(*src),
        source_cell=src,
        arrival=arrival,
        state=states,
        accepted_order=accepted_order,
        radius_km=radius_km,
    )


def _initial_band(grid: TerrainGrid, src: Cell, radius_km: float, init_radius: int):
    """ソース近傍セルを直線（曲面弦）距離で初期化する

    ソースとの間の矩形にマスクセルがあるセルは対象外。
    """
    yield src, 0.0
    r0, c0 = src
    p0 = grid.cell_center(r0, c0)
    z0 = grid.elevation[src] / 1000.0
    for r in range(max(0, r0 - init_radius), min(grid.n_rows, r0 + init_radius + 1)):
        for c in range(max(0, c0 - init_radius), min(grid.n_cols, c0 + init_radius + 1)):
            if (r, c) == src or (r - r0) ** 2 + (c - c0) ** 2 > init_radius ** 2:
                continue
            box = grid.mask[min(r, r0):max(r, r0) + 1, min(c, c0):max(c, c0) + 1]
            if not box.all():
                continue
            horizontal = great_circle_km(p0, grid.cell_center(r, c), radius_km)
            yield (r, c), math.hypot(horizontal, grid.elevation[r, c] / 1000.0 - z0)


# ==================== 経路の逆追跡 ====================

def _bilinear(values: np.ndarray, y: float, x: float) -> float:
    """インデックス空間での双一次補間（範囲外・非有限なら nan）"""
    n_rows, n_cols = values.shape
    if n_rows < 2 or n_cols < 2 or y < 0 or x < 0 or y > n_rows - 1 or x > n_cols - 1:
        return math.nan
    r0 = min(int(math.floor(y)), n_rows - 2)
    c0 = min(int(math.floor(x)), n_cols - 2)
    dy, dx = y - r0, x - c0
    v00, v01 = values[r0, c0], values[r0, c0 + 1]
    v10, v11 = values[r0 + 1, c0], values[r0 + 1, c0 + 1]
    if not (math.isfinite(v00) and math.isfinite(v01) and math.isfinite(v10) and math.isfinite(v11)):
        return math.nan
    return float(v00 * (1 - dy) * (1 - dx) + v01 * (1 - dy) * dx + v10 * dy * (1 - dx) + v11 * dy * dx)


def _point_at(grid: TerrainGrid, y: float, x: float) -> GeoPoint:
    return GeoPoint(grid.origin.lat + y * grid.cell_size, grid.origin.lon + x * grid.cell_size)


def _elevation_km(grid: TerrainGrid, y: float, x: float) -> float:
    r = min(max(int(round(y)), 0), grid.n_rows - 1)
    c = min(max(int(round(x)), 0), grid.n_cols - 1)
    return float(grid.elevation[r, c]) / 1000.0


def _segment_km(grid: TerrainGrid, a: tuple[float, float], b: tuple[float, float], radius_km: float) -> float:
    horizontal = great_circle_km(_point_at(grid, *a), _point_at(grid, *b), radius_km)
    return math.hypot(horizontal, _elevation_km(grid, *b) - _elevation_km(grid, *a))


def trace_path(field_: ArrivalField, target: GeoPoint, max_steps: Optional[int] = None) -> GeoPolyline:
    """到達距離場を最急降下でソースまで逆追跡する

    半セル刻みの勾配ステップ（双一次補間）を基本とし、壁際などで補間が使えない・
    値が下がらない場合は8近傍の最小セルへ移動する。ソースから1セル以内で終了。
    """
    grid = field_.grid
    T = field_.arrival
    cell = grid.snap(target)
    if not math.isfinite(T[cell]):
        raise UnreachableError(f"target ({target.lat}, {target.lon}) is not reachable from the source")

    sy, sx = field_.source_cell
    hy = field_.radius_km * math.radians(grid.cell_size)
    y, x = float(cell[0]), float(cell[1])
    current = float(T[cell])
    trail = [(y, x)]
    limit = max_steps or 8 * grid.n_rows * grid.n_cols

    for _ in range(limit):
        if math.hypot(y - sy, x - sx) <= 1.0:
            break
        moved = False
        gy = _bilinear(T, y + 0.5, x) - _bilinear(T, y - 0.5, x)
        gx = _bilinear(T, y, x + 0.5) - _bilinear(T, y, x - 0.5)
        if math.isfinite(gy) and math.isfinite(gx):
            lat = math.radians(grid.origin.lat + y * grid.cell_size)
            hx = max(hy * math.cos(lat), 1e-12)
            # 物理空間の降下方向をインデックス空間の半セル刻みに変換
            py, px = -gy / hy, -gx / hx
            norm = math.hypot(py, px)
            if norm > 0:
                dy, dx = py / hy, px / hx
                scale = 0.5 / math.hypot(dy, dx)
                ny, nx = y + dy * scale, x + dx * scale
                value = _bilinear(T, ny, nx)
                if math.isfinite(value) and value < current:
                    y, x, current = ny, nx, value
                    moved = True
        if not moved:
            r, c = int(round(y)), int(round(x))
            best = None
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    nb = (r + dr, c + dc)
                    if grid.contains(nb) and T[nb] < current and (best is None or T[nb] < T[best]):
                        best = nb
            if best is None:
                break
            y, x, current = float(best[0]), float(best[1]), float(T[best])
        trail.append((y, x))

    trail.append((float(sy), float(sx)))
    trail.reverse()
    # 重複点を除く
    points = [trail[0]]
    for p in trail[1:]:
        if p != points[-1]:
            points.append(p)
    total = math.fsum(_segment_km(grid, a, b, field_.radius_km) for a, b in zip(points, points[1:]))
    return GeoPolyline(tuple(_point_at(grid, y, x) for y, x in points), total)


# ==================== サイト間行列 ====================

def _solve_for_pool(args):
    grid, point, radius_km = args
    return solve_arrival(grid, point, radius_km)


def pairwise_lengths(
    grid: TerrainGrid,
    sites: list[GeoPoint],
    radius_km: float = EARTH_RADIUS_KM,
    labels: Optional[list[str]] = None,
    with_paths: bool = True,
    workers: int = 1,
) -> CostMatrix:
    """全サイト対の FMM 長さ行列と経路

    対称性のため、対 (i, j) (i < j) の値は常にサイト i の場から取る。
    """
    if len(sites) < 2:
        raise TerrainError("need at least two sites")
    labels = list(labels) if labels is not None else [str(k + 1) for k in range(len(sites))]
    cells = []
    for label, point in zip(labels, sites):
        cell = grid.snap(point)
        if not grid.mask[cell]:
            raise TerrainError(f"site {label} lies on a masked (land or no-data) cell")
        cells.append(cell)
    for i in range(len(cells)):
        for j in range(i + 1, len(cells)):
            if cells[i] == cells[j]:
                raise TerrainError(f"coincident sites {labels[i]} and {labels[j]} snap to the same cell")

    # 最後のサイトの場は i < j の対で参照されない
    sources = sites[:-1]
    logger.info("[FMM] solving %d arrival fields on %dx%d grid", len(sources), grid.n_rows, grid.n_cols)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            fields = list(pool.map(_solve_for_pool, [(grid, p, radius_km) for p in sources]))
    else:
        fields = [solve_arrival(grid, p, radius_km) for p in sources]

    n = len(sites)
    lengths = np.zeros((n, n))
    paths = {}
    for i in range(n):
        for j in range(i + 1, n):
            value = fields[i].at(cells[j])
            if not math.isfinite(value):
                raise UnreachableError(f"sites {labels[i]} and {labels[j]} are not connected by sea")
            lengths[i, j] = lengths[j, i] = value
            if with_paths:
                paths[(i, j)] = trace_path(fields[i], sites[j])
            logger.debug("[FMM] %s-%s: %.2f km", labels[i], labels[j], value)
    return CostMatrix(tuple(labels), lengths, paths=paths, method="fmm")
