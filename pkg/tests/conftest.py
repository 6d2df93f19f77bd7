import pytest

from src.netmodel import (
    ConstraintSet,
    Network,
    case_study_constraints,
    case_study_network,
)


@pytest.fixture
def med() -> Network:
    return case_study_network()


@pytest.fixture
def bd_1100(med) -> ConstraintSet:
    return case_study_constraints(med, "bd_constraints_1100_3")


@pytest.fixture
def bd_800(med) -> ConstraintSet:
    return case_study_constraints(med, "bd_constraints_800_2")


def complete_graph(n: int, weight=lambda i, j: float(i + j + 1)) -> Network:
    labels = [str(k + 1) for k in range(n)]
    rows = [(labels[i], labels[j], weight(i, j), weight(i, j)) for i in range(n) for j in range(i + 1, n)]
    return Network.from_rows(rows, labels=labels)


def path_graph(n: int) -> Network:
    labels = [str(k + 1) for k in range(n)]
    rows = [(labels[k], labels[k + 1], 1.0, 1.0) for k in range(n - 1)]
    return Network.from_rows(rows, labels=labels)


def edges_by_label(net: Network, outcome) -> set[str]:
    return {net.edge_label(e) for e in outcome.tree.edges}


def approx_km(value: float) -> float:
    return pytest.approx(value, abs=1e-6)
