import math

import numpy as np
import pytest

from conftest import approx_km, complete_graph, path_graph
from src.heuristic_oracle import (
    MAX_ENUMERATION_NODES,
    EnumerationLimitError,
    brute_force_optimum,
    enumerate_trees,
    prim_constrained,
    random_connected_network,
    random_constraints,
    random_instance,
    sweep_starts,
)
from src.netmodel import Constraint, ConstraintSet, NetworkError
from src.solver import SolveStatus, kruskal_bound


# ==================== 全列挙 ====================

@pytest.mark.parametrize("n,count", [(2, 1), (3, 3), (4, 16), (5, 125), (6, 1296)])
def test_complete_graph_tree_counts(n, count):
    trees = [t.edges for t in enumerate_trees(complete_graph(n))]
    assert len(trees) == count == n ** (n - 2)
    assert len(set(trees)) == count


def test_path_graph_has_one_tree():
    (tree,) = enumerate_trees(path_graph(5))
    assert tree.edges == frozenset({(0, 1), (1, 2), (2, 3), (3, 4)})


def test_enumeration_size_guard():
    with pytest.raises(EnumerationLimitError):
        enumerate_trees(random_instance(MAX_ENUMERATION_NODES + 1, seed=0))


def test_brute_force_mediterranean(med, bd_1100, bd_800):
    unconstrained = brute_force_optimum(med)
    assert unconstrained.cost == approx_km(1416.31)
    assert unconstrained.stats.nodes_expanded == 1296
    assert brute_force_optimum(med, bd_1100).cost == approx_km(1491.60)
    assert brute_force_optimum(med, bd_800).cost == approx_km(1517.80)


def test_brute_force_infeasible(med):
    c = ConstraintSet((Constraint(med.index("B"), med.index("D"), 700.0),))
    outcome = brute_force_optimum(med, c)
    assert outcome.status is SolveStatus.INFEASIBLE
    assert "1296" in outcome.reason


# ==================== Prim ヒューリスティック ====================

def test_prim_without_constraints_is_mst():
    for seed in range(30):
        net = random_connected_network(4 + seed % 7, seed=seed)
        outcome = prim_constrained(net)
        assert outcome.feasible
        assert outcome.eliminated == ()
        assert outcome.cost == pytest.approx(kruskal_bound(net), abs=1e-9)


def test_prim_mediterranean_unconstrained(med):
    outcome = prim_constrained(med)
    assert outcome.cost == approx_km(1416.31)


@pytest.mark.slow
def test_prim_trees_satisfy_constraints_and_never_beat_oracle():
    for seed in range(60):
        net = random_connected_network(4 + seed % 4, seed=seed)
        constraints = random_constraints(net, 1 + seed % 3, seed=seed)
        oracle = brute_force_optimum(net, constraints)
        for start in range(net.n):
            outcome = prim_constrained(net, constraints, start)
            if not outcome.feasible:
                assert outcome.reason
                continue
            assert outcome.report.satisfied
            assert oracle.status is SolveStatus.OPTIMAL
            assert outcome.cost >= oracle.cost - 1e-9


def test_prim_all_starts_on_mediterranean(med, bd_1100, bd_800):
    for constraints, floor in ((bd_1100, 1491.60), (bd_800, 1517.80)):
        for start in range(med.n):
            outcome = prim_constrained(med, constraints, start)
            if outcome.feasible:
                assert outcome.report.satisfied
                assert outcome.cost >= floor - 1e-9


def test_prim_reports_failure():
    net = path_graph(3)
    outcome = prim_constrained(net, ConstraintSet((Constraint(0, 2, 1.5),)))
    assert not outcome.feasible
    assert outcome.eliminated == ((1, 2),)
    assert "frontier exhausted" in outcome.reason
    data = outcome.to_dict(net)
    assert data["status"] == "failed"
    assert data["edges"] is None
    assert data["eliminated"] == [["2", "3"]]


def test_prim_rejects_bad_start(med):
    with pytest.raises(NetworkError):
        prim_constrained(med, start=6)
    with pytest.raises(NetworkError):
        prim_constrained(med, start=-1)


def test_prim_on_hundred_nodes():
    net = random_instance(100, seed=1)
    threshold = max(300.0, 1.1 * net.length(0, 50))
    outcome = prim_constrained(net, ConstraintSet((Constraint(0, 50, round(threshold, 2)),)))
    assert outcome.feasible or outcome.reason
    if outcome.feasible:
        assert outcome.report.satisfied
        assert len(outcome.tree.edges) == 99
        assert outcome.cost >= kruskal_bound(net) - 1e-9


def test_sweep_starts_picks_cheapest_feasible(med, bd_800):
    sweep = sweep_starts(med, bd_800)
    assert len(sweep.runs) == 6
    feasible = [r for r in sweep.runs if r.feasible]
    if feasible:
        assert sweep.best.cost == min(r.cost for r in feasible)
        assert sweep.best.start == min(r.start for r in feasible if r.cost == sweep.best.cost)
    else:
        assert sweep.best is None
    data = sweep.to_dict(med)
    assert [r["start"] for r in data["runs"]] == list("ABCDEF")


# ==================== ランダム問題 ====================

def test_random_instance_is_deterministic():
    first, second = random_instance(12, seed=42), random_instance(12, seed=42)
    assert first.lengths == second.lengths
    assert random_instance(12, seed=43).lengths != first.lengths


def test_random_instance_shape_and_bounds():
    net = random_instance(100, seed=7, side=500.0)
    assert len(net.edges) == 4950
    assert net.lengths == net.costs
    values = np.array(list(net.lengths.values()))
    assert np.all(values > 0)
    assert np.all(values <= 500.0 * math.sqrt(2))
    with pytest.raises(NetworkError):
        random_instance(1)


def test_random_connected_network_is_connected_and_rounded():
    for seed in range(20):
        net = random_connected_network(8, seed=seed)
        assert net.n == 8
        assert all(round(v, 2) == v for v in net.lengths.values())
        assert kruskal_bound(net) < math.inf


def test_random_constraints_are_distinct_pairs():
    net = random_connected_network(7, seed=3)
    constraints = random_constraints(net, 5, seed=3)
    assert len({c.pair for c in constraints}) == 5
    assert all(c.length_bounded for c in constraints)
    with pytest.raises(NetworkError):
        random_constraints(net, 22, seed=3)
