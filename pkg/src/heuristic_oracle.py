"""
Heuristic & Oracle Module
Prim ベースの制約付きヒューリスティック、全域木の全列挙、ランダム問題生成
"""

import heapq
import logging
import math
from dataclasses import dataclass
from typing import Iterator, Optional

import networkx as nx
import numpy as np

from .netmodel import (
    Constraint,
    ConstraintReport,
    ConstraintSet,
    Edge,
    Network,
    NetworkError,
    SpanningTree,
    check_constraints,
    edge_key,
    tree_cost,
    tree_length,
    tree_path,
)
from .solver import SearchStats, SolveOutcome, SolveStatus

logger = logging.getLogger(__name__)

MAX_ENUMERATION_NODES = 10
DEFAULT_REGION_SIDE = 500.0


class EnumerationLimitError(ValueError):
    """全列挙の上限超過"""


# ==================== ヒューリスティック ====================

@dataclass(frozen=True)
class HeuristicOutcome:
    """1つの開始ノードからの結果（木、または辺を使い切って失敗）"""
    start: int
    tree: Optional[SpanningTree] = None
    cost: Optional[float] = None
    report: Optional[ConstraintReport] = None
    eliminated: tuple[Edge, ...] = ()
    reason: str = ""

    @property
    def feasible(self) -> bool:
        return self.tree is not None

    def to_dict(self, net: Network) -> dict:
        data = {
            "status": "feasible" if self.feasible else "failed",
            "start": net.labels[self.start],
            "reason": self.reason or None,
            "eliminated": [[net.labels[i], net.labels[j]] for i, j in self.eliminated],
        }
        if self.tree is not None:
            data["edges"] = [[net.labels[i], net.labels[j]] for i, j in self.tree.sorted_edges()]
            data["total_cost"] = self.cost
            data["total_length_km"] = tree_length(self.tree, net)
            data["constraints"] = self.report.to_dict(net)
        else:
            data["edges"] = None
            data["total_cost"] = None
        return data


class _GrowingTree:
    """開始ノードを根とする親ポインタ木"""

    def __init__(self, n: int, root: int):
        self.parent = [-1] * n
        self.depth = [0] * n
        self.inside = [False] * n
        self.inside[root] = True
        self.parent[root] = root

    def add(self, i: int, j: int) -> None:
        self.parent[j] = i
        self.depth[j] = self.depth[i] + 1
        self.inside[j] = True

    def path_edges(self, u: int, v: int) -> list[Edge]:
        """木の中の u-v 経路の辺"""
        left, right = [], []
        while self.depth[u] > self.depth[v]:
            left.append((u, self.parent[u]))
            u = self.parent[u]
        while self.depth[v] > self.depth[u]:
            right.append((v, self.parent[v]))
            v = self.parent[v]
        while u != v:
            left.append((u, self.parent[u]))
            right.append((v, self.parent[v]))
            u, v = self.parent[u], self.parent[v]
        return left + right


def _join_violation(
    net: Network, grown: _GrowingTree, i: int, j: int, by_node: dict[int, list[Constraint]]
) -> Optional[Constraint]:
    """j を i 経由で加えたときに閾値を超える制約"""
    for c in by_node.get(j, ()):
        other = c.a if c.b == j else c.b
        if not grown.inside[other]:
            continue
        edges = grown.path_edges(other, i) + [(i, j)]
        length = math.fsum(net.length(u, v) for u, v in edges)
        if length > c.max_length_km or len(edges) > c.max_hops:
            return c
    return None


def prim_constrained(net: Network, constraints: ConstraintSet = ConstraintSet(), start: int = 0) -> HeuristicOutcome:
    """Prim 法で木を伸ばし、制約を破る辺を恒久的に除外する

    既に木に入ったノード間の経路は成長しても変わらないので、判定は
    新ノード j が端点となる制約対だけで足りる。
    """
    if not (isinstance(start, int) and 0 <= start < net.n):
        raise NetworkError(f"start node {start!r} is not in V (n={net.n})")
    constraints.validate(net)
    by_node: dict[int, list[Constraint]] = {}
    for c in constraints:
        if c.vacuous:
            continue
        by_node.setdefault(c.a, []).append(c)
        by_node.setdefault(c.b, []).append(c)

    grown = _GrowingTree(net.n, start)
    frontier: list[tuple[float, Edge, int, int]] = []
    eliminated: list[Edge] = []
    chosen: list[Edge] = []

    def push_from(u: int) -> None:
        for v in net.adjacency[u]:
            if not grown.inside[v]:
                e = edge_key(u, v)
                heapq.heappush(frontier, (net.costs[e], e, u, v))

    push_from(start)
    while len(chosen) < net.n - 1:
        if not frontier:
            reason = (
                f"frontier exhausted with {len(chosen) + 1} of {net.n} nodes joined"
                f" ({len(eliminated)} edges eliminated)"
            )
            logger.info("[PRIM] start %s failed: %s", net.labels[start], reason)
            return HeuristicOutcome(start, eliminated=tuple(eliminated), reason=reason)
        _, e, i, j = heapq.heappop(frontier)
        if grown.inside[j]:
            continue
        violated = _join_violation(net, grown, i, j, by_node)
        if violated is not None:
            eliminated.append(e)
            logger.debug(
                "[PRIM] eliminate %s (violates %s-%s)",
                net.edge_label(e), net.labels[violated.a], net.labels[violated.b],
            )
            continue
        grown.add(i, j)
        chosen.append(e)
        push_from(j)

    tree = SpanningTree(net.n, frozenset(chosen))
    report = check_constraints(tree, net, constraints)
    return HeuristicOutcome(
        start,
        tree=tree,
        cost=tree_cost(tree, net),
        report=report,
        eliminated=tuple(eliminated),
    )


@dataclass(frozen=True)
class SweepResult:
    """全開始ノードの結果と最良の実行可能解"""
    runs: tuple[HeuristicOutcome, ...]
    best: Optional[HeuristicOutcome] = None

    def to_dict(self, net: Network) -> dict:
        return {
            "best": self.best.to_dict(net) if self.best else None,
            "runs": [
                {
                    "start": net.labels[r.start],
                    "status": "feasible" if r.feasible else "failed",
                    "total_cost": r.cost,
                }
                for r in self.runs
            ],
        }


def sweep_starts(net: Network, constraints: ConstraintSet = ConstraintSet()) -> SweepResult:
    """全ノードを開始点に試し、最小費用の実行可能解を選ぶ（同値は小さい開始ノード）"""
    runs = tuple(prim_constrained(net, constraints, start) for start in range(net.n))
    feasible = [r for r in runs if r.feasible]
    best = min(feasible, key=lambda r: (r.cost, r.start)) if feasible else None
    return SweepResult(runs, best)


# ==================== 全列挙 ====================

def enumerate_trees(net: Network) -> Iterator[SpanningTree]:
    """全域木を1本ずつ生成する（辺の採否によるバックトラック）"""
    if net.n > MAX_ENUMERATION_NODES:
        raise EnumerationLimitError(
            f"enumeration is limited to {MAX_ENUMERATION_NODES} nodes, network has {net.n}"
        )
    edges = net.edges
    need = net.n - 1

    def walk(k: int, chosen: list[Edge], comp: list[int]) -> Iterator[SpanningTree]:
        if len(chosen) == need:
            yield SpanningTree(net.n, frozenset(chosen))
            return
        if len(edges) - k < need - len(chosen):
            return
        i, j = edges[k]
        if comp[i] != comp[j]:
            merged = comp[:]
            old, new = comp[j], comp[i]
            for v, label in enumerate(merged):
                if label == old:
                    merged[v] = new
            chosen.append((i, j))
            yield from walk(k + 1, chosen, merged)
            chosen.pop()
        yield from walk(k + 1, chosen, comp)

    return walk(0, [], list(range(net.n)))


def brute_force_optimum(net: Network, constraints: ConstraintSet = ConstraintSet()) -> SolveOutcome:
    """全列挙して制約を満たす最小費用の木を返す"""
    constraints.validate(net)
    stats = SearchStats()
    best_tree: Optional[SpanningTree] = None
    best_cost = math.inf
    for tree in enumerate_trees(net):
        stats.nodes_expanded += 1
        cost = tree_cost(tree, net)
        if cost < best_cost and check_constraints(tree, net, constraints).satisfied:
            best_tree, best_cost = tree, cost
            stats.incumbent_updates += 1
    if best_tree is None:
        return SolveOutcome(
            SolveStatus.INFEASIBLE,
            reason=f"none of the {stats.nodes_expanded} spanning trees satisfies the constraints",
            stats=stats,
        )
    return SolveOutcome(
        SolveStatus.OPTIMAL,
        tree=best_tree,
        cost=best_cost,
        report=check_constraints(best_tree, net, constraints),
        stats=stats,
    )


# ==================== ランダム問題 ====================

def random_instance(n: int, seed: Optional[int] = None, side: float = DEFAULT_REGION_SIDE) -> Network:
    """[0,side]² の一様乱数点による完全グラフ（長さ = 費用 = ユークリッド距離）"""
    if n < 2:
        raise NetworkError(f"a random instance needs at least two nodes, got {n}")
    rng = np.random.default_rng(seed)
    points = rng.uniform(0.0, side, size=(n, 2))
    rows = []
    for i in range(n):
        for j in range(i + 1, n):
            d = float(math.hypot(*(points[i] - points[j])))
            rows.append((str(i), str(j), d, d))
    return Network.from_rows(rows, labels=[str(k) for k in range(n)])


def random_connected_network(
    n: int,
    seed: Optional[int] = None,
    density: float = 0.6,
    max_length: float = 100.0,
) -> Network:
    """ランダムな連結グラフ（長さと費用は独立な一様乱数）"""
    if n < 2:
        raise NetworkError(f"a random network needs at least two nodes, got {n}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    pairs: set[Edge] = set()
    # ランダムな全域木で連結性を保証
    for k in range(1, n):
        pairs.add(edge_key(int(order[k]), int(order[rng.integers(0, k)])))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                pairs.add((i, j))
    rows = []
    for i, j in sorted(pairs):
        length = round(float(rng.uniform(1.0, max_length)), 2)
        cost = round(float(rng.uniform(1.0, max_length)), 2)
        rows.append((str(i), str(j), length, cost))
    return Network.from_rows(rows, labels=[str(k) for k in range(n)])


def random_constraints(net: Network, count: int, seed: Optional[int] = None) -> ConstraintSet:
    """ランダムな制約対

    長さ閾値はグラフ最短路の 0.9 倍から最小全域木上の経路長の 1.05 倍の間、
    ホップ閾値は半々の確率で無制限。実行不能な例も混ざる。
    """
    pairs = [(i, j) for i in range(net.n) for j in range(i + 1, net.n)]
    if not 0 <= count <= len(pairs):
        raise NetworkError(f"cannot draw {count} constraint pairs from {len(pairs)}")
    rng = np.random.default_rng(seed)
    graph = net.to_graph()
    mst = nx.minimum_spanning_tree(graph, weight="cost")
    tree = SpanningTree(net.n, frozenset(edge_key(u, v) for u, v in mst.edges))
    entries = []
    for k in rng.choice(len(pairs), size=count, replace=False):
        a, b = pairs[int(k)]
        shortest = nx.dijkstra_path_length(graph, a, b, weight="weight")
        path = tree_path(tree, net, a, b)
        lo, hi = 0.9 * shortest, 1.05 * max(path.length_km, shortest)
        max_length = round(float(rng.uniform(lo, hi)), 2)
        if rng.random() < 0.5:
            fewest = nx.shortest_path_length(graph, a, b)
            max_hops = int(rng.integers(fewest, max(path.hops, fewest) + 1))
        else:
            max_hops = math.inf
        entries.append(Constraint(a, b, max_length, max_hops))
    return ConstraintSet(tuple(entries))
