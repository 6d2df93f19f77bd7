"""
Terrain Grid Module
海底地形ラスタの読み込みと測地距離プリミティブ
"""

import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from .netmodel import CostMatrix

logger = logging.getLogger(__name__)

# IUGG 平均地球半径
EARTH_RADIUS_KM = 6371.0088
DEFAULT_NODATA = -9999.0
DEFAULT_RESOLUTION_DEG = 0.01

Cell = tuple[int, int]


class GridFormatError(ValueError):
    """ASCIIグリッドの書式エラー"""


class TerrainError(ValueError):
    """地形上の位置・セルに関するエラー"""


@dataclass(frozen=True)
class GeoPoint:
    """地理座標（度）"""
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise TerrainError(f"non-finite coordinates ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise TerrainError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon < 180.0:
            raise TerrainError(f"longitude {self.lon} outside [-180, 180)")

    def lonlat(self) -> list[float]:
        """GeoJSON 順 [lon, lat]"""
        return [self.lon, self.lat]


@dataclass(frozen=True)
class Site:
    """ケーブル陸揚げ地点"""
    id: str
    name: str
    point: GeoPoint


def great_circle_km(p: GeoPoint, q: GeoPoint, radius_km: float = EARTH_RADIUS_KM) -> float:
    """ハーバーサイン公式による大円距離"""
    phi1 = math.radians(p.lat)
    phi2 = math.radians(q.lat)
    dphi = phi2 - phi1
    dlam = math.radians(q.lon - p.lon)
    a = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2.0 * radius_km * math.asin(min(1.0, math.sqrt(a)))


# ==================== グリッド ====================

@dataclass(frozen=True, eq=False)
class TerrainGrid:
    """緯度経度の矩形ラスタ

    row 0 が最南行。origin は左下セルの中心。mask=True が通行可能セル。
    """
    n_rows: int
    n_cols: int
    origin: GeoPoint
    cell_size: float
    elevation: np.ndarray
    mask: np.ndarray
    nodata_value: float = DEFAULT_NODATA

    def __post_init__(self):
        if self.n_rows <= 0 or self.n_cols <= 0:
            raise GridFormatError(f"grid dimensions must be positive, got {self.n_rows}x{self.n_cols}")
        if not (math.isfinite(self.cell_size) and self.cell_size > 0):
            raise GridFormatError(f"cellsize must be positive, got {self.cell_size}")
        elevation = np.array(self.elevation, dtype=float)
        mask = np.array(self.mask, dtype=bool)
        if elevation.shape != (self.n_rows, self.n_cols) or mask.shape != elevation.shape:
            raise GridFormatError(
                f"expected {self.n_rows}x{self.n_cols} values, got elevation {elevation.shape}, mask {mask.shape}"
            )
        if not mask.any():
            raise TerrainError("no traversable region")
        if not np.all(np.isfinite(elevation[mask])):
            raise GridFormatError("traversable cells must have finite elevations")
        elevation.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "elevation", elevation)
        object.__setattr__(self, "mask", mask)

    def cell_center(self, row: int, col: int) -> GeoPoint:
        return GeoPoint(
            self.origin.lat + row * self.cell_size,
            self.origin.lon + col * self.cell_size,
        )

    def contains(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.n_rows and 0 <= c < self.n_cols

    def snap(self, point: GeoPoint) -> Cell:
        """最寄りセルの (row, col)"""
        row = int(round((point.lat - self.origin.lat) / self.cell_size))
        col = int(round((point.lon - self.origin.lon) / self.cell_size))
        if not self.contains((row, col)):
            raise TerrainError(f"point ({point.lat}, {point.lon}) is outside the grid")
        return row, col

    def traversable(self, cell: Cell) -> bool:
        return self.contains(cell) and bool(self.mask[cell])

    def axis_steps_km(self, radius_km: float = EARTH_RADIUS_KM) -> tuple[np.ndarray, np.ndarray]:
        """隣接セル間の曲面ステップ長

        Returns:
            (ns, ew): ns[r, c] は (r,c)-(r+1,c)、ew[r, c] は (r,c)-(r,c+1) の長さ（km）。
            マスクされたセルに接するステップは inf。
        """
        d = math.radians(self.cell_size)
        lat = np.radians(self.origin.lat + np.arange(self.n_rows) * self.cell_size)
        ns_h = np.full((max(self.n_rows - 1, 0), self.n_cols), radius_km * d)
        ew_row = 2.0 * radius_km * np.arcsin(np.minimum(1.0, np.cos(lat) * math.sin(d / 2)))
        ew_h = np.repeat(ew_row[:, None], max(self.n_cols - 1, 0), axis=1)

        z = np.where(self.mask, self.elevation, 0.0) / 1000.0
        ns = np.hypot(ns_h, z[1:, :] - z[:-1, :])
        ew = np.hypot(ew_h, z[:, 1:] - z[:, :-1])
        ns[~(self.mask[1:, :] & self.mask[:-1, :])] = np.inf
        ew[~(self.mask[:, 1:] & self.mask[:, :-1])] = np.inf
        return ns, ew


def surface_step_km(grid: TerrainGrid, cell_a: Cell, cell_b: Cell, radius_km: float = EARTH_RADIUS_KM) -> float:
    """4近傍セル間の3次元曲面要素長（水平大円距離と標高差の斜辺）"""
    if abs(cell_a[0] - cell_b[0]) + abs(cell_a[1] - cell_b[1]) != 1:
        raise TerrainError(f"cells {cell_a} and {cell_b} are not 4-neighbors")
    for cell in (cell_a, cell_b):
        if not grid.traversable(cell):
            raise TerrainError(f"cell {cell} is masked or outside the grid")
    horizontal = great_circle_km(grid.cell_center(*cell_a), grid.cell_center(*cell_b), radius_km)
    dz_km = (grid.elevation[cell_b] - grid.elevation[cell_a]) / 1000.0
    return math.hypot(horizontal, dz_km)


# ==================== ASCII グリッド入出力 ====================

_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "xllcenter", "yllcenter", "cellsize", "nodata_value")


def load_grid(raster_text: str, land_traversable: bool = False, sea_level: float = 0.0) -> TerrainGrid:
    """ASCIIグリッドを読み込み検証する

    NODATA セルと、既定では陸地（標高 >= sea_level）をマスクする。
    """
    lines = [line.strip() for line in raster_text.splitlines() if line.strip()]
    header: dict[str, float] = {}
    pos = 0
    while pos < len(lines):
        parts = lines[pos].split()
        key = parts[0].lower()
        if key not in _HEADER_KEYS:
            break
        if len(parts) != 2:
            raise GridFormatError(f"malformed header line: {lines[pos]!r}")
        try:
            header[key] = float(parts[1])
        except ValueError:
            raise GridFormatError(f"malformed header value: {lines[pos]!r}") from None
        pos += 1

    for key in ("ncols", "nrows", "cellsize"):
        if key not in header:
            raise GridFormatError(f"missing header field {key!r}")
    if ("xllcorner" in header) == ("xllcenter" in header) or ("yllcorner" in header) == ("yllcenter" in header):
        raise GridFormatError("header needs exactly one of xllcorner/xllcenter and yllcorner/yllcenter")
    n_cols, n_rows = int(header["ncols"]), int(header["nrows"])
    if n_cols != header["ncols"] or n_rows != header["nrows"] or n_cols <= 0 or n_rows <= 0:
        raise GridFormatError(f"ncols/nrows must be positive integers, got {header['ncols']}/{header['nrows']}")
    cell = header["cellsize"]
    if cell <= 0:
        raise GridFormatError(f"cellsize must be positive, got {cell}")
    nodata = header.get("nodata_value", DEFAULT_NODATA)
    half = cell / 2.0
    lon0 = header["xllcenter"] if "xllcenter" in header else header["xllcorner"] + half
    lat0 = header["yllcenter"] if "yllcenter" in header else header["yllcorner"] + half

    body = lines[pos:]
    if len(body) != n_rows:
        raise GridFormatError(f"expected {n_rows} data rows, got {len(body)}")
    values = np.empty((n_rows, n_cols), dtype=float)
    for k, line in enumerate(body):
        parts = line.split()
        if len(parts) != n_cols:
            raise GridFormatError(f"data row {k + 1}: expected {n_cols} values, got {len(parts)}")
        try:
            # ファイルは北の行から
            values[n_rows - 1 - k] = [float(v) for v in parts]
        except ValueError:
            raise GridFormatError(f"data row {k + 1}: non-numeric value") from None

    mask = (values != nodata) & np.isfinite(values)
    if not land_traversable:
        mask &= values < sea_level
    if not mask.any():
        raise TerrainError("no traversable region")
    logger.info("[GRID] loaded %dx%d grid, %d traversable cells", n_rows, n_cols, int(mask.sum()))
    return TerrainGrid(
        n_rows=n_rows,
        n_cols=n_cols,
        origin=GeoPoint(lat0, lon0),
        cell_size=cell,
        elevation=np.where(mask, values, np.where(values == nodata, np.nan, values)),
        mask=mask,
        nodata_value=nodata,
    )


def write_grid(grid: TerrainGrid) -> str:
    """ASCIIグリッドへ書き出す（マスクセルは NODATA）"""
    half = grid.cell_size / 2.0
    out = [
        f"ncols {grid.n_cols}",
        f"nrows {grid.n_rows}",
        f"xllcorner {grid.origin.lon - half!r}",
        f"yllcorner {grid.origin.lat - half!r}",
        f"cellsize {grid.cell_size!r}",
        f"NODATA_value {grid.nodata_value!r}",
    ]
    for r in range(grid.n_rows - 1, -1, -1):
        row = np.where(grid.mask[r], grid.elevation[r], grid.nodata_value)
        out.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(out) + "\n"


def read_grid(path: Union[str, Path], land_traversable: bool = False) -> TerrainGrid:
    return load_grid(Path(path).read_text(encoding="utf-8"), land_traversable=land_traversable)


def resample_grid(grid: TerrainGrid, resolution: float) -> TerrainGrid:
    """最近傍法でセルサイズを resolution に変更する"""
    if resolution <= 0:
        raise GridFormatError(f"resolution must be positive, got {resolution}")
    if math.isclose(resolution, grid.cell_size):
        return grid
    lat_span = (grid.n_rows - 1) * grid.cell_size
    lon_span = (grid.n_cols - 1) * grid.cell_size
    n_rows = int(math.floor(lat_span / resolution + 1e-9)) + 1
    n_cols = int(math.floor(lon_span / resolution + 1e-9)) + 1
    rows = np.clip(np.rint(np.arange(n_rows) * resolution / grid.cell_size).astype(int), 0, grid.n_rows - 1)
    cols = np.clip(np.rint(np.arange(n_cols) * resolution / grid.cell_size).astype(int), 0, grid.n_cols - 1)
    logger.info("[GRID] resampled %.4f° -> %.4f° (%dx%d)", grid.cell_size, resolution, n_rows, n_cols)
    return TerrainGrid(
        n_rows=n_rows,
        n_cols=n_cols,
        origin=grid.origin,
        cell_size=resolution,
        elevation=grid.elevation[np.ix_(rows, cols)],
        mask=grid.mask[np.ix_(rows, cols)],
        nodata_value=grid.nodata_value,
    )


def synthetic_grid(
    n_rows: int,
    n_cols: int,
    origin: GeoPoint = GeoPoint(0.0, 0.0),
    cell_size: float = DEFAULT_RESOLUTION_DEG,
    depth_m: float = -100.0,
    walls: Iterable[tuple[slice, slice]] = (),
) -> TerrainGrid:
    """一定水深の合成グリッド（walls で指定した範囲を陸地としてマスク）"""
    elevation = np.full((n_rows, n_cols), depth_m, dtype=float)
    mask = np.ones((n_rows, n_cols), dtype=bool)
    for rows, cols in walls:
        elevation[rows, cols] = 10.0
        mask[rows, cols] = False
    return TerrainGrid(n_rows, n_cols, origin, cell_size, elevation, mask)


# ==================== サイト ====================

def parse_sites(text: str) -> list[Site]:
    """サイト CSV `id,name,lat,lon` を読み込む"""
    rows = [row for row in csv.reader(io.StringIO(text)) if row and any(cell.strip() for cell in row)]
    if rows and rows[0][0].strip().lower() == "id":
        rows = rows[1:]
    sites = []
    for lineno, row in enumerate(rows, start=1):
        if len(row) != 4:
            raise GridFormatError(f"sites row {lineno}: expected 4 fields, got {len(row)}")
        sid, name, lat, lon = (cell.strip() for cell in row)
        try:
            point = GeoPoint(float(lat), float(lon))
        except ValueError as e:
            raise GridFormatError(f"sites row {lineno}: {e}") from None
        sites.append(Site(sid, name, point))
    if len({s.id for s in sites}) != len(sites):
        raise GridFormatError("duplicate site ids")
    return sites


def read_sites(path: Union[str, Path]) -> list[Site]:
    return parse_sites(Path(path).read_text(encoding="utf-8"))


def great_circle_matrix(
    sites: list[Site],
    radius_km: float = EARTH_RADIUS_KM,
    labels: Optional[list[str]] = None,
) -> CostMatrix:
    """地形を無視した大円距離の行列"""
    n = len(sites)
    lengths = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            lengths[i, j] = lengths[j, i] = great_circle_km(sites[i].point, sites[j].point, radius_km)
    return CostMatrix(tuple(labels or [s.id for s in sites]), lengths, method="great-circle")
