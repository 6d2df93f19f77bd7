"""
GeoJSON Export Module
サイト・ケーブル経路・選ばれた木を GeoJSON FeatureCollection に書き出す
"""

import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

import numpy as np

from .fmm import GeoPolyline
from .netmodel import CostMatrix, Edge, Network, NetworkError, edge_key
from .terrain import EARTH_RADIUS_KM, GeoPoint, Site, great_circle_km


def great_circle_chord(p: GeoPoint, q: GeoPoint, segments: int = 32, radius_km: float = EARTH_RADIUS_KM) -> GeoPolyline:
    """p-q 間の大円弧を球面線形補間で折れ線にする"""
    def unit(point: GeoPoint) -> np.ndarray:
        lat, lon = math.radians(point.lat), math.radians(point.lon)
        return np.array([math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)])

    a, b = unit(p), unit(q)
    omega = math.acos(float(np.clip(np.dot(a, b), -1.0, 1.0)))
    points = [p]
    if omega > 0:
        for t in np.linspace(0.0, 1.0, segments + 1)[1:-1]:
            v = (math.sin((1 - t) * omega) * a + math.sin(t * omega) * b) / math.sin(omega)
            lat = math.degrees(math.asin(float(np.clip(v[2], -1.0, 1.0))))
            lon = math.degrees(math.atan2(float(v[1]), float(v[0])))
            if lon >= 180.0:
                lon -= 360.0
            points.append(GeoPoint(lat, lon))
    points.append(q)
    return GeoPolyline(tuple(points), great_circle_km(p, q, radius_km))


def site_feature(site: Site) -> dict:
    return {
        "type": "Feature",
        "geometry": {"type": "Point", "coordinates": site.point.lonlat()},
        "properties": {"id": site.id, "name": site.name},
    }


def _site_lookup(net: Network, sites: Iterable[Site]) -> dict[int, Site]:
    by_id = {s.id: s for s in sites}
    missing = [label for label in net.labels if label not in by_id]
    if missing:
        raise NetworkError(f"no site coordinates for nodes: {', '.join(missing)}")
    return {k: by_id[label] for k, label in enumerate(net.labels)}


def edge_features(
    net: Network,
    edges: Iterable[Edge],
    sites: Iterable[Site],
    paths: Optional[Mapping[Edge, GeoPolyline]] = None,
) -> list[dict]:
    """辺ごとの LineString。FMM 経路があればそれを、なければ大円弧を使う"""
    located = _site_lookup(net, sites)
    paths = paths or {}
    features = []
    for e in sorted(edge_key(*e) for e in edges):
        i, j = e
        if e in paths:
            line, source = paths[e], "fmm"
        else:
            line, source = great_circle_chord(located[i].point, located[j].point), "great-circle"
        features.append(line.to_feature({
            "i": net.labels[i],
            "j": net.labels[j],
            "length_km": net.lengths[e],
            "cost": net.costs[e],
            "geometry_source": source,
        }))
    return features


def tree_collection(
    net: Network,
    edges: Iterable[Edge],
    sites: Iterable[Site],
    paths: Optional[Mapping[Edge, GeoPolyline]] = None,
) -> dict:
    """サイトと選ばれた辺の FeatureCollection"""
    sites = list(sites)
    return {
        "type": "FeatureCollection",
        "features": [site_feature(s) for s in sites] + edge_features(net, edges, sites, paths),
    }


def matrix_collection(matrix: CostMatrix) -> dict:
    """全サイト対の経路（cmd_costs の出力）"""
    features = []
    for (i, j), line in sorted(matrix.paths.items()):
        features.append(line.to_feature({
            "i": matrix.labels[i],
            "j": matrix.labels[j],
            "length_km": float(matrix.lengths[i, j]),
            "geometry_source": matrix.method,
        }))
    return {"type": "FeatureCollection", "features": features}


def parse_paths(text: str, net: Network) -> dict[Edge, GeoPolyline]:
    """matrix_collection の出力を辺→ポリラインに読み戻す"""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise NetworkError(f"paths file is not valid JSON: {e}") from None
    paths = {}
    for feature in data.get("features", []):
        if feature.get("geometry", {}).get("type") != "LineString":
            continue
        props = feature.get("properties", {})
        e = edge_key(net.index(props["i"]), net.index(props["j"]))
        points = tuple(GeoPoint(lat, lon) for lon, lat in feature["geometry"]["coordinates"])
        paths[e] = GeoPolyline(points, float(props["length_km"]))
    return paths


def write_json(data: dict, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
