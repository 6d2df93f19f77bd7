"""
Exact Solver Module
辺の採否を分岐する分枝限定法（Kruskal 補完による下界）
"""

import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

import networkx as nx
from networkx.utils import UnionFind

from .netmodel import (
    ConstraintReport,
    ConstraintSet,
    Edge,
    Network,
    NetworkError,
    SpanningTree,
    check_constraints,
    tree_cost,
    tree_length,
)

logger = logging.getLogger(__name__)

DEFAULT_BUDGET_SECONDS = 60.0
DEFAULT_BUDGET_NODES = 10_000_000

# Dijkstra の和は fsum ではないため、最短路枝刈りにだけ相対誤差を許す
_SHORTEST_PATH_SLACK = 1e-12

PRUNE_RULES = ("bound", "feasibility", "shortest_path", "disconnected")


class SolveStatus(Enum):
    """探索の結果"""
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class Budget:
    """時間・ノード数の上限（先に達した方で打ち切り）"""
    seconds: float = DEFAULT_BUDGET_SECONDS
    nodes: int = DEFAULT_BUDGET_NODES

    def __post_init__(self):
        if not (self.seconds > 0):
            raise ValueError(f"budget seconds must be positive, got {self.seconds}")
        if self.nodes < 1:
            raise ValueError(f"budget nodes must be at least 1, got {self.nodes}")


@dataclass
class SearchStats:
    """探索統計"""
    nodes_expanded: int = 0
    incumbent_updates: int = 0
    elapsed_seconds: float = 0.0
    prunes: dict[str, int] = field(default_factory=lambda: {rule: 0 for rule in PRUNE_RULES})

    def prune(self, rule: str) -> None:
        self.prunes[rule] += 1

    def to_dict(self) -> dict:
        return {
            "nodes_expanded": self.nodes_expanded,
            "incumbent_updates": self.incumbent_updates,
            "elapsed_seconds": self.elapsed_seconds,
            "prunes": dict(self.prunes),
        }


@dataclass(frozen=True)
class SearchNode:
    """探索ノード: 採用確定辺・除外確定辺"""
    forced_in: frozenset[Edge] = frozenset()
    forced_out: frozenset[Edge] = frozenset()
    # 除外辺が親から変わったときだけ最短路チェックをやり直す
    recheck_paths: bool = True

    def __post_init__(self):
        if self.forced_in & self.forced_out:
            raise ValueError("an edge cannot be both forced in and forced out")


@dataclass(frozen=True)
class SolveOutcome:
    """最適解・実行不能・予算切れのいずれか"""
    status: SolveStatus
    tree: Optional[SpanningTree] = None
    cost: Optional[float] = None
    report: Optional[ConstraintReport] = None
    reason: str = ""
    stats: SearchStats = field(default_factory=SearchStats)

    @property
    def has_tree(self) -> bool:
        return self.tree is not None

    def to_dict(self, net: Network) -> dict:
        data = {"status": self.status.value, "reason": self.reason or None}
        if self.tree is not None:
            data["edges"] = [[net.labels[i], net.labels[j]] for i, j in self.tree.sorted_edges()]
            data["total_cost"] = self.cost
            data["total_length_km"] = tree_length(self.tree, net)
            data["constraints"] = self.report.to_dict(net) if self.report else []
        else:
            data["edges"] = None
            data["total_cost"] = None
        data["stats"] = self.stats.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict, net: Network, constraints: ConstraintSet) -> "SolveOutcome":
        """to_dict の出力を読み戻す（経路レポートは再計算）"""
        status = SolveStatus(data["status"])
        stats_data = data.get("stats") or {}
        stats = SearchStats(
            nodes_expanded=stats_data.get("nodes_expanded", 0),
            incumbent_updates=stats_data.get("incumbent_updates", 0),
            elapsed_seconds=stats_data.get("elapsed_seconds", 0.0),
            prunes={rule: stats_data.get("prunes", {}).get(rule, 0) for rule in PRUNE_RULES},
        )
        if not data.get("edges"):
            return cls(status, reason=data.get("reason") or "", stats=stats)
        tree = SpanningTree.from_labels(net, (tuple(pair) for pair in data["edges"]))
        return cls(
            status,
            tree=tree,
            cost=tree_cost(tree, net),
            report=check_constraints(tree, net, constraints),
            reason=data.get("reason") or "",
            stats=stats,
        )


# ==================== 下界 ====================

def _kruskal_order(net: Network) -> list[Edge]:
    """費用→辞書順で並べた辺"""
    return sorted(net.edges, key=lambda e: (net.costs[e], e))


def kruskal_completion(
    net: Network,
    forced_in: Iterable[Edge] = (),
    forced_out: Iterable[Edge] = (),
    order: Optional[list[Edge]] = None,
) -> Optional[tuple[float, frozenset[Edge]]]:
    """確定辺を尊重した最小全域補完。全域化できなければ None"""
    forced_in = frozenset(forced_in)
    forced_out = frozenset(forced_out)
    uf = UnionFind(range(net.n))
    chosen = []
    for i, j in sorted(forced_in):
        if uf[i] == uf[j]:
            raise NetworkError(f"forced-in edges contain a cycle through ({i}, {j})")
        uf.union(i, j)
        chosen.append((i, j))
    for e in order if order is not None else _kruskal_order(net):
        if len(chosen) == net.n - 1:
            break
        if e in forced_in or e in forced_out:
            continue
        i, j = e
        if uf[i] != uf[j]:
            uf.union(i, j)
            chosen.append(e)
    if len(chosen) != net.n - 1:
        return None
    return math.fsum(net.costs[e] for e in chosen), frozenset(chosen)


def kruskal_bound(net: Network, forced_in: Iterable[Edge] = (), forced_out: Iterable[Edge] = ()) -> float:
    """補完コスト。全域化不能なら inf（枝刈りの合図）"""
    completion = kruskal_completion(net, forced_in, forced_out)
    return math.inf if completion is None else completion[0]


# ==================== 枝刈り ====================

def _forest_violation(net: Network, forced_in: frozenset[Edge], constraints: ConstraintSet) -> Optional[str]:
    """採用確定辺だけで既に連結された制約対の閾値違反"""
    adj: dict[int, list[int]] = {}
    for i, j in forced_in:
        adj.setdefault(i, []).append(j)
        adj.setdefault(j, []).append(i)
    for c in constraints:
        if c.vacuous or c.a not in adj or c.b not in adj:
            continue
        parent = {c.a: c.a}
        queue = deque([c.a])
        while queue and c.b not in parent:
            u = queue.popleft()
            for v in adj.get(u, ()):
                if v not in parent:
                    parent[v] = u
                    queue.append(v)
        if c.b not in parent:
            continue
        nodes = [c.b]
        while nodes[-1] != c.a:
            nodes.append(parent[nodes[-1]])
        length = math.fsum(net.length(u, v) for u, v in zip(nodes, nodes[1:]))
        hops = len(nodes) - 1
        if length > c.max_length_km or hops > c.max_hops:
            return f"{net.labels[c.a]}-{net.labels[c.b]} already {length:.2f} km / {hops} hops"
    return None


def _shortest_path_violation(net: Network, forced_out: frozenset[Edge], constraints: ConstraintSet) -> Optional[str]:
    """除外辺を除いたグラフ上の最短路ですら閾値を超える制約対"""
    graph = None
    for c in constraints:
        if c.vacuous:
            continue
        if graph is None:
            graph = net.to_graph(exclude=forced_out)
        try:
            if c.length_bounded:
                dist = nx.dijkstra_path_length(graph, c.a, c.b, weight="weight")
                if dist > c.max_length_km * (1 + _SHORTEST_PATH_SLACK):
                    return (
                        f"shortest {net.labels[c.a]}-{net.labels[c.b]} path is {dist:.2f} km"
                        f" > {c.max_length_km:g} km"
                    )
            if c.hops_bounded:
                hops = nx.shortest_path_length(graph, c.a, c.b)
                if hops > c.max_hops:
                    return (
                        f"fewest hops {net.labels[c.a]}-{net.labels[c.b]} is {hops}"
                        f" > {int(c.max_hops)}"
                    )
        except nx.NetworkXNoPath:
            return f"{net.labels[c.a]} and {net.labels[c.b]} are disconnected"
    return None


# ==================== 探索 ====================

def solve_exact(
    net: Network,
    constraints: ConstraintSet = ConstraintSet(),
    budget: Optional[Budget] = None,
) -> SolveOutcome:
    """制約付き最小全域木を厳密に解く

    深さ優先で採用側の子を先に探索する。分岐辺は現在の Kruskal 補完のうち
    未確定で最も安い辺。
    """
    constraints.validate(net)
    budget = budget or Budget()
    order = _kruskal_order(net)
    stats = SearchStats()
    started = time.perf_counter()

    root_reason = _shortest_path_violation(net, frozenset(), constraints)
    if root_reason is not None:
        stats.prune("shortest_path")
        stats.elapsed_seconds = time.perf_counter() - started
        logger.info("[B&B] infeasible at root: %s", root_reason)
        return SolveOutcome(SolveStatus.INFEASIBLE, reason=root_reason, stats=stats)

    best_cost = math.inf
    best_edges: Optional[frozenset[Edge]] = None
    stack = [SearchNode(recheck_paths=False)]
    exhausted = False

    while stack:
        if stats.nodes_expanded >= budget.nodes or time.perf_counter() - started > budget.seconds:
            exhausted = True
            break
        node = stack.pop()
        stats.nodes_expanded += 1

        completion = kruskal_completion(net, node.forced_in, node.forced_out, order)
        if completion is None:
            stats.prune("disconnected")
            continue
        bound, edges = completion
        if bound >= best_cost:
            stats.prune("bound")
            continue
        if _forest_violation(net, node.forced_in, constraints) is not None:
            stats.prune("feasibility")
            continue
        if node.recheck_paths and _shortest_path_violation(net, node.forced_out, constraints) is not None:
            stats.prune("shortest_path")
            continue

        tree = SpanningTree(net.n, edges)
        if check_constraints(tree, net, constraints).satisfied:
            best_cost, best_edges = bound, edges
            stats.incumbent_updates += 1
            logger.debug("[B&B] incumbent %.6f after %d nodes", bound, stats.nodes_expanded)
            continue

        undecided = [e for e in order if e in edges and e not in node.forced_in]
        if not undecided:
            stats.prune("feasibility")
            continue
        e = undecided[0]
        stack.append(SearchNode(node.forced_in, node.forced_out | {e}, recheck_paths=True))
        stack.append(SearchNode(node.forced_in | {e}, node.forced_out, recheck_paths=False))

    stats.elapsed_seconds = time.perf_counter() - started
    tree = SpanningTree(net.n, best_edges) if best_edges is not None else None
    report = check_constraints(tree, net, constraints) if tree is not None else None

    if exhausted:
        logger.warning(
            "[WARN] budget exhausted after %d nodes (%.1fs)", stats.nodes_expanded, stats.elapsed_seconds
        )
        return SolveOutcome(
            SolveStatus.BUDGET_EXHAUSTED,
            tree=tree,
            cost=best_cost if tree is not None else None,
            report=report,
            reason="search budget exhausted; returning best incumbent" if tree else "search budget exhausted",
            stats=stats,
        )
    if tree is None:
        logger.info("[B&B] infeasible after %d nodes", stats.nodes_expanded)
        return SolveOutcome(
            SolveStatus.INFEASIBLE,
            reason="no spanning tree satisfies the constraints",
            stats=stats,
        )
    logger.info("[B&B] optimal cost %.6f after %d nodes", best_cost, stats.nodes_expanded)
    return SolveOutcome(SolveStatus.OPTIMAL, tree=tree, cost=best_cost, report=report, stats=stats)
