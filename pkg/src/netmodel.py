"""
Network Model Module
ケーブル網のグラフ・コスト・木・制約の語彙
"""

import csv
import io
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

import networkx as nx
import numpy as np
from networkx.utils import UnionFind

logger = logging.getLogger(__name__)

# 1kmあたり約24,000 USD の概算
DEFAULT_RATE_PER_KM = 24000.0

Edge = tuple[int, int]


class NetworkError(ValueError):
    """ネットワーク・木・制約の入力エラー"""


def edge_key(i: int, j: int) -> Edge:
    """無向辺を (小, 大) に正規化"""
    if i == j:
        raise NetworkError(f"self-loop on node {i}")
    return (i, j) if i < j else (j, i)


def cost_from_length(length_km: float, rate_per_km: float = DEFAULT_RATE_PER_KM) -> float:
    """ケーブル長から費用を計算（線形モデル）"""
    if not math.isfinite(length_km) or length_km < 0:
        raise NetworkError(f"length must be a nonnegative number, got {length_km}")
    if not math.isfinite(rate_per_km) or rate_per_km <= 0:
        raise NetworkError(f"rate must be positive, got {rate_per_km}")
    return length_km * rate_per_km


def fit_rate(lengths: Iterable[float], costs: Iterable[float]) -> float:
    """原点を通る最小二乗で km 単価を推定"""
    l = np.asarray(list(lengths), dtype=float)
    c = np.asarray(list(costs), dtype=float)
    if l.size == 0 or l.shape != c.shape:
        raise NetworkError("need matching, non-empty length and cost samples")
    return float(np.dot(l, c) / np.dot(l, l))


def _natural_order(labels: Iterable[str]) -> list[str]:
    labels = list(dict.fromkeys(labels))
    if all(label.lstrip("-").isdigit() for label in labels):
        return sorted(labels, key=int)
    return sorted(labels)


# ==================== ネットワーク ====================

@dataclass(frozen=True)
class Network:
    """無向グラフ G=(V,E)、辺ごとの長さ l_ij と費用 c_ij

    ノードは内部的に 0..n-1 の整数、入出力では labels を使う。
    """
    labels: tuple[str, ...]
    lengths: dict[Edge, float]
    costs: dict[Edge, float]

    def __post_init__(self):
        n = len(self.labels)
        if n < 2:
            raise NetworkError("a network needs at least two nodes")
        if len(set(self.labels)) != n:
            raise NetworkError("duplicate node labels")
        if set(self.lengths) != set(self.costs):
            raise NetworkError("lengths and costs must cover the same edges")
        for (i, j), length in self.lengths.items():
            if i == j:
                raise NetworkError(f"self-loop on node {self.labels[i]}")
            if not (0 <= i < j < n):
                raise NetworkError(f"edge ({i}, {j}) is not normalized or out of range")
            cost = self.costs[(i, j)]
            if not (math.isfinite(length) and length > 0):
                raise NetworkError(f"edge {self.labels[i]}-{self.labels[j]}: length must be positive, got {length}")
            if not (math.isfinite(cost) and cost > 0):
                raise NetworkError(f"edge {self.labels[i]}-{self.labels[j]}: cost must be positive, got {cost}")
        if not nx.is_connected(self.to_graph()):
            raise NetworkError("network is not connected")

    @classmethod
    def from_rows(
        cls,
        rows: Iterable[tuple[str, str, float, Optional[float]]],
        rate_per_km: float = DEFAULT_RATE_PER_KM,
        labels: Optional[Iterable[str]] = None,
    ) -> "Network":
        """(i, j, length_km, cost|None) の行から構築。cost 省略時は単価から計算"""
        rows = list(rows)
        if labels is None:
            labels = _natural_order(label for row in rows for label in row[:2])
        labels = tuple(labels)
        index = {label: k for k, label in enumerate(labels)}
        lengths: dict[Edge, float] = {}
        costs: dict[Edge, float] = {}
        for a, b, length, cost in rows:
            if a not in index or b not in index:
                raise NetworkError(f"unknown node in edge {a}-{b}")
            key = edge_key(index[a], index[b])
            if key in lengths:
                raise NetworkError(f"duplicate edge {a}-{b}")
            lengths[key] = float(length)
            costs[key] = float(cost) if cost is not None else cost_from_length(float(length), rate_per_km)
        return cls(labels=labels, lengths=lengths, costs=costs)

    @property
    def n(self) -> int:
        return len(self.labels)

    @cached_property
    def edges(self) -> tuple[Edge, ...]:
        """辞書順に並べた辺（決定的なタイブレーク用）"""
        return tuple(sorted(self.lengths))

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return tuple(tuple(sorted(nbrs)) for nbrs in adj)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {label: k for k, label in enumerate(self.labels)}

    def index(self, label: Union[str, int]) -> int:
        """ラベルからノード番号へ"""
        try:
            return self._index[str(label)]
        except KeyError:
            raise NetworkError(f"unknown node {label!r}") from None

    def edge_label(self, e: Edge) -> str:
        return f"{self.labels[e[0]]}{'' if self._short_labels else '-'}{self.labels[e[1]]}"

    @cached_property
    def _short_labels(self) -> bool:
        return all(len(label) == 1 for label in self.labels)

    def has_edge(self, i: int, j: int) -> bool:
        return edge_key(i, j) in self.lengths

    def length(self, i: int, j: int) -> float:
        return self.lengths[edge_key(i, j)]

    def cost(self, i: int, j: int) -> float:
        return self.costs[edge_key(i, j)]

    def to_graph(self, exclude: Iterable[Edge] = ()) -> nx.Graph:
        """networkx グラフ（weight=長さ, cost=費用）"""
        excluded = set(exclude)
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        for e, length in self.lengths.items():
            if e not in excluded:
                g.add_edge(*e, weight=length, cost=self.costs[e])
        return g

    def scaled(self, factor: float) -> "Network":
        """全辺の費用を factor 倍したコピー"""
        return Network(
            labels=self.labels,
            lengths=dict(self.lengths),
            costs={e: c * factor for e, c in self.costs.items()},
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["i", "j", "length_km", "cost"])
        for i, j in self.edges:
            writer.writerow([self.labels[i], self.labels[j], repr(self.lengths[(i, j)]), repr(self.costs[(i, j)])])
        return buf.getvalue()


# ==================== コスト行列 ====================

@dataclass
class CostMatrix:
    """サイト間のケーブル長（対称行列）と経路ポリライン"""
    labels: tuple[str, ...]
    lengths: np.ndarray
    paths: dict[Edge, object] = field(default_factory=dict)
    method: str = "fmm"

    def __post_init__(self):
        n = len(self.labels)
        if self.lengths.shape != (n, n):
            raise NetworkError(f"matrix shape {self.lengths.shape} does not match {n} labels")
        if not np.array_equal(self.lengths, self.lengths.T):
            raise NetworkError("cost matrix is not symmetric")
        if np.any(np.diag(self.lengths) != 0.0):
            raise NetworkError("cost matrix diagonal must be zero")

    def pairs(self) -> Iterator[tuple[int, int, float]]:
        n = len(self.labels)
        for i in range(n):
            for j in range(i + 1, n):
                yield i, j, float(self.lengths[i, j])

    def to_csv(self) -> str:
        """`i,j,length_km` 形式（ネットワークファイルとしてそのまま読める）"""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["i", "j", "length_km"])
        for i, j, length in self.pairs():
            writer.writerow([self.labels[i], self.labels[j], repr(length)])
        return buf.getvalue()

    def to_network(self, rate_per_km: float = DEFAULT_RATE_PER_KM) -> Network:
        """完全グラフのネットワークに変換"""
        return Network.from_rows(
            ((self.labels[i], self.labels[j], length, None) for i, j, length in self.pairs()),
            rate_per_km=rate_per_km,
            labels=self.labels,
        )


# ==================== 制約 ====================

@dataclass(frozen=True)
class Constraint:
    """ノード対 (a↔b) の長さ上限とホップ上限（inf = 無制限）"""
    a: int
    b: int
    max_length_km: float = math.inf
    max_hops: float = math.inf

    def __post_init__(self):
        if self.a == self.b:
            raise NetworkError(f"constraint endpoints must differ (got {self.a})")
        if self.a > self.b:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)
        if not (self.max_length_km > 0):
            raise NetworkError(f"length threshold must be positive, got {self.max_length_km}")
        if not (self.max_hops > 0):
            raise NetworkError(f"hop threshold must be positive, got {self.max_hops}")
        if math.isfinite(self.max_hops) and self.max_hops != int(self.max_hops):
            raise NetworkError(f"hop threshold must be an integer, got {self.max_hops}")

    @property
    def pair(self) -> Edge:
        return (self.a, self.b)

    @property
    def length_bounded(self) -> bool:
        return math.isfinite(self.max_length_km)

    @property
    def hops_bounded(self) -> bool:
        return math.isfinite(self.max_hops)

    @property
    def vacuous(self) -> bool:
        return not (self.length_bounded or self.hops_bounded)

    def to_dict(self, net: Optional[Network] = None) -> dict:
        name = (lambda k: net.labels[k]) if net is not None else (lambda k: k)
        return {
            "a": name(self.a),
            "b": name(self.b),
            "max_length_km": self.max_length_km if self.length_bounded else None,
            "max_hops": int(self.max_hops) if self.hops_bounded else None,
        }


@dataclass(frozen=True)
class ConstraintSet:
    """制約集合 ℂ（1つのノード対につき高々1件）"""
    entries: tuple[Constraint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        seen = set()
        for c in self.entries:
            if c.pair in seen:
                raise NetworkError(f"duplicate constraint for pair {c.pair}")
            seen.add(c.pair)

    def __iter__(self) -> Iterator[Constraint]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def union(self, other: "ConstraintSet") -> "ConstraintSet":
        return ConstraintSet(self.entries + other.entries)

    def validate(self, net: Network) -> None:
        for c in self.entries:
            if c.b >= net.n:
                raise NetworkError(f"constraint pair ({c.a}, {c.b}) is not in V (n={net.n})")

    @cached_property
    def endpoints(self) -> frozenset[int]:
        return frozenset(k for c in self.entries for k in c.pair)

    def to_csv(self, net: Network) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["a", "b", "max_length_km", "max_hops"])
        for c in self.entries:
            writer.writerow([
                net.labels[c.a],
                net.labels[c.b],
                repr(c.max_length_km) if c.length_bounded else "",
                int(c.max_hops) if c.hops_bounded else "",
            ])
        return buf.getvalue()


# ==================== 全域木 ====================

@dataclass(frozen=True)
class SpanningTree:
    """n ノード上の全域木（n-1 本の辺）"""
    n: int
    edges: frozenset[Edge]

    def __post_init__(self):
        edges = frozenset(edge_key(*e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        if len(edges) != self.n - 1:
            raise NetworkError(f"a spanning tree on {self.n} nodes needs {self.n - 1} edges, got {len(edges)}")
        uf = UnionFind(range(self.n))
        for i, j in edges:
            if not (0 <= i < j < self.n):
                raise NetworkError(f"edge ({i}, {j}) out of range")
            if uf[i] == uf[j]:
                raise NetworkError(f"edges contain a cycle through ({i}, {j})")
            uf.union(i, j)

    @classmethod
    def from_labels(cls, net: Network, pairs: Iterable[tuple[str, str]]) -> "SpanningTree":
        edges = set()
        for a, b in pairs:
            key = edge_key(net.index(a), net.index(b))
            if key not in net.lengths:
                raise NetworkError(f"edge {a}-{b} is not in the network")
            edges.add(key)
        return cls(net.n, frozenset(edges))

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in sorted(self.edges):
            adj[i].append(j)
            adj[j].append(i)
        return tuple(tuple(nbrs) for nbrs in adj)

    def side_of(self, i: int, j: int) -> frozenset[int]:
        """木の辺 (i,j) を除いたとき j 側に残るノード集合"""
        if edge_key(i, j) not in self.edges:
            raise NetworkError(f"({i}, {j}) is not a tree edge")
        seen = {j}
        queue = deque([j])
        while queue:
            u = queue.popleft()
            for v in self.adjacency[u]:
                if v not in seen and not (u == j and v == i):
                    seen.add(v)
                    queue.append(v)
        return frozenset(seen)

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)


@dataclass(frozen=True)
class TreePath:
    """木の中の a→b の一意な経路"""
    a: int
    b: int
    nodes: tuple[int, ...]
    length_km: float
    hops: int

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple(zip(self.nodes, self.nodes[1:]))

    def reversed(self) -> "TreePath":
        return TreePath(self.b, self.a, tuple(reversed(self.nodes)), self.length_km, self.hops)

    def describe(self, net: Network) -> str:
        return "-".join(net.labels[k] for k in self.nodes)


def tree_path(tree: SpanningTree, net: Network, a: int, b: int) -> TreePath:
    """木の中の a-b 経路（長さは辺の並び順に依存しない fsum）"""
    if a == b:
        return TreePath(a, b, (a,), 0.0, 0)
    parent = {a: a}
    queue = deque([a])
    while queue and b not in parent:
        u = queue.popleft()
        for v in tree.adjacency[u]:
            if v not in parent:
                parent[v] = u
                queue.append(v)
    if b not in parent:
        raise NetworkError(f"nodes {a} and {b} are not connected in the tree")
    nodes = [b]
    while nodes[-1] != a:
        nodes.append(parent[nodes[-1]])
    nodes.reverse()
    length = math.fsum(net.length(u, v) for u, v in zip(nodes, nodes[1:]))
    return TreePath(a, b, tuple(nodes), length, len(nodes) - 1)


@dataclass(frozen=True)
class ConstraintCheck:
    """1件の制約の判定結果"""
    constraint: Constraint
    path: TreePath

    @property
    def length_ok(self) -> bool:
        return self.path.length_km <= self.constraint.max_length_km

    @property
    def hops_ok(self) -> bool:
        return self.path.hops <= self.constraint.max_hops

    @property
    def satisfied(self) -> bool:
        return self.length_ok and self.hops_ok

    def to_dict(self, net: Network) -> dict:
        return {
            **self.constraint.to_dict(net),
            "path": [net.labels[k] for k in self.path.nodes],
            "length_km": self.path.length_km,
            "hops": self.path.hops,
            "satisfied": self.satisfied,
        }


@dataclass(frozen=True)
class ConstraintReport:
    """全制約の判定レポート"""
    checks: tuple[ConstraintCheck, ...]

    @property
    def satisfied(self) -> bool:
        return all(c.satisfied for c in self.checks)

    @property
    def violations(self) -> list[ConstraintCheck]:
        return [c for c in self.checks if not c.satisfied]

    def to_dict(self, net: Network) -> list[dict]:
        return [c.to_dict(net) for c in self.checks]


def check_constraints(tree: SpanningTree, net: Network, constraints: ConstraintSet) -> ConstraintReport:
    """各制約対の木経路長とホップ数を判定"""
    return ConstraintReport(tuple(
        ConstraintCheck(c, tree_path(tree, net, c.a, c.b)) for c in constraints
    ))


def tree_cost(tree: SpanningTree, net: Network) -> float:
    """木の総費用 Σ c_ij"""
    return math.fsum(net.costs[e] for e in tree.edges)


def tree_length(tree: SpanningTree, net: Network) -> float:
    """木の総ケーブル長"""
    return math.fsum(net.lengths[e] for e in tree.edges)


# ==================== CSV 入出力 ====================

def _rows(text: str) -> list[list[str]]:
    rows = [
        [cell.strip() for cell in row]
        for row in csv.reader(io.StringIO(text))
        if row and any(cell.strip() for cell in row) and not row[0].lstrip().startswith("#")
    ]
    return rows


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def parse_network(text: str, rate_per_km: float = DEFAULT_RATE_PER_KM) -> Network:
    """ネットワーク CSV `i,j,length_km[,cost]` を読み込む"""
    rows = _rows(text)
    if rows and len(rows[0]) >= 3 and not _is_number(rows[0][2]):
        rows = rows[1:]
    parsed = []
    for lineno, row in enumerate(rows, start=1):
        if len(row) not in (3, 4):
            raise NetworkError(f"network row {lineno}: expected 3 or 4 fields, got {len(row)}")
        try:
            length = float(row[2])
            cost = float(row[3]) if len(row) == 4 and row[3] != "" else None
        except ValueError:
            raise NetworkError(f"network row {lineno}: non-numeric length or cost") from None
        parsed.append((row[0], row[1], length, cost))
    if not parsed:
        raise NetworkError("network file has no edges")
    return Network.from_rows(parsed, rate_per_km=rate_per_km)


def parse_constraints(text: str, net: Network) -> ConstraintSet:
    """制約 CSV `a,b,max_length_km,max_hops`（空欄 = 無制限）を読み込む"""
    rows = _rows(text)
    if rows and len(rows[0]) >= 2 and rows[0][0].lower() == "a" and rows[0][1].lower() == "b":
        rows = rows[1:]
    entries = []
    for lineno, row in enumerate(rows, start=1):
        row = row + [""] * (4 - len(row))
        if len(row) != 4:
            raise NetworkError(f"constraint row {lineno}: expected 4 fields")
        try:
            max_length = float(row[2]) if row[2] else math.inf
            max_hops = int(row[3]) if row[3] else math.inf
        except ValueError:
            raise NetworkError(f"constraint row {lineno}: bad threshold") from None
        entries.append(Constraint(net.index(row[0]), net.index(row[1]), max_length, max_hops))
    constraints = ConstraintSet(tuple(entries))
    constraints.validate(net)
    return constraints


def parse_tree(text: str, net: Network) -> SpanningTree:
    """木の辺リスト CSV `i,j` を読み込む"""
    rows = _rows(text)
    if rows and rows[0][:2] == ["i", "j"]:
        rows = rows[1:]
    return SpanningTree.from_labels(net, ((row[0], row[1]) for row in rows))


def read_network(path: Union[str, Path], rate_per_km: float = DEFAULT_RATE_PER_KM) -> Network:
    return parse_network(Path(path).read_text(encoding="utf-8"), rate_per_km)


def read_constraints(path: Union[str, Path], net: Network) -> ConstraintSet:
    return parse_constraints(Path(path).read_text(encoding="utf-8"), net)


# ==================== ケーススタディ ====================

def _data_text(name: str) -> str:
    return (resources.files(__package__) / "data" / name).read_text(encoding="utf-8")


def case_study_network() -> Network:
    """地中海6都市のネットワーク（長さをそのまま費用とする）"""
    return parse_network(_data_text("mediterranean_network.csv"))


def case_study_constraints(net: Network, name: str) -> ConstraintSet:
    """同梱の制約ファイル（例: 'bd_constraints_1100_3'）"""
    return parse_constraints(_data_text(f"{name}.csv"), net)
