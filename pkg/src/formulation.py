"""
ILP Formulation Module
辺の側を表す変数で全域木を書いた制約付き MST の整数計画モデル（行生成・LP出力・検証）
"""

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping, Optional

from .netmodel import (
    Constraint,
    ConstraintSet,
    Network,
    NetworkError,
    SpanningTree,
    edge_key,
)

logger = logging.getLogger(__name__)

# 行評価の許容誤差（長さ行は実数係数）
ROW_TOLERANCE = 1e-9


class FormulationError(ValueError):
    """モデル構築・割当のエラー"""


class RowFamily(Enum):
    """制約行の種類"""
    CARDINALITY = "cardinality"
    SIDE = "side"
    CONNECTIVITY = "connectivity"
    LENGTH = "length"
    HOP = "hop"
    LINEARIZATION = "linearization"


class Sense(Enum):
    EQ = "="
    LE = "<="
    GE = ">="


@dataclass(frozen=True)
class Row:
    """線形制約 Σ coef·var (sense) rhs"""
    name: str
    family: RowFamily
    terms: tuple[tuple[str, float], ...]
    sense: Sense
    rhs: float

    def lhs(self, values: Mapping[str, int]) -> float:
        return math.fsum(coef * values[var] for var, coef in self.terms)

    def satisfied_by(self, values: Mapping[str, int]) -> bool:
        lhs = self.lhs(values)
        if self.sense is Sense.EQ:
            return abs(lhs - self.rhs) <= ROW_TOLERANCE
        if self.sense is Sense.LE:
            return lhs <= self.rhs + ROW_TOLERANCE
        return lhs >= self.rhs - ROW_TOLERANCE


# ==================== 変数名 ====================

def x_name(i: int, j: int) -> str:
    i, j = edge_key(i, j)
    return f"x_{i + 1}_{j + 1}"


def y_name(i: int, j: int, k: int) -> str:
    """y_ij^k: 辺(i,j)が木に含まれ、k が j 側"""
    return f"y_{i + 1}_{j + 1}_{k + 1}"


def z_name(i: int, j: int, a: int, b: int) -> str:
    """z_ij^ab = y_ij^a · y_ji^b"""
    return f"z_{i + 1}_{j + 1}_{a + 1}_{b + 1}"


def _side_term(i: int, j: int, k: int) -> dict[str, float]:
    """y_ij^k を線形式で表す

    k == j なら x_ij、k == i なら 0（k ∈ V\\{i,j} のみ変数を持つ）。
    """
    if k == j:
        return {x_name(i, j): 1.0}
    if k == i:
        return {}
    return {y_name(i, j, k): 1.0}


def _linear(*parts: tuple[float, dict[str, float]]) -> dict[str, float]:
    out: dict[str, float] = {}
    for scale, expr in parts:
        for var, coef in expr.items():
            out[var] = out.get(var, 0.0) + scale * coef
    return {var: coef for var, coef in out.items() if coef != 0.0}


def _z_active(c: Constraint) -> bool:
    return not c.vacuous


# ==================== モデル ====================

@dataclass(frozen=True, eq=False)
class IlpModel:
    """全変数・全行（構造行、長さ・ホップ行、積の線形化行）"""
    net: Network
    constraints: ConstraintSet
    variables: tuple[str, ...]
    objective: dict[str, float]
    rows: tuple[Row, ...]

    def rows_by_family(self) -> dict[RowFamily, int]:
        counts = {family: 0 for family in RowFamily}
        for row in self.rows:
            counts[row.family] += 1
        return counts

    def family(self, family: RowFamily) -> list[Row]:
        return [row for row in self.rows if row.family is family]


def build_model(net: Network, constraints: ConstraintSet) -> IlpModel:
    """ネットワークと制約集合から ILP を構築する"""
    try:
        constraints.validate(net)
    except NetworkError as e:
        raise FormulationError(str(e)) from None
    n = net.n
    edges = net.edges
    variables: list[str] = []
    rows: list[Row] = []

    def add_row(name, family, expr: dict[str, float], sense: Sense, rhs: float):
        terms = tuple(sorted(expr.items(), key=lambda t: variables_order[t[0]]))
        rows.append(Row(name, family, terms, sense, rhs))

    # 変数: x, y（両向き）, z（制約ごとに両向き）
    for i, j in edges:
        variables.append(x_name(i, j))
    for i, j in edges:
        for k in range(n):
            if k in (i, j):
                continue
            variables.append(y_name(i, j, k))
            variables.append(y_name(j, i, k))
    active = [c for c in constraints if _z_active(c)]
    for c in active:
        for i, j in edges:
            variables.append(z_name(i, j, c.a, c.b))
            variables.append(z_name(j, i, c.a, c.b))
    variables_order = {v: k for k, v in enumerate(variables)}

    # Σx = n-1
    add_row("card", RowFamily.CARDINALITY, {x_name(i, j): 1.0 for i, j in edges}, Sense.EQ, n - 1)

    # y_ij^k + y_ji^k = x_ij
    for i, j in edges:
        for k in range(n):
            if k in (i, j):
                continue
            expr = {y_name(i, j, k): 1.0, y_name(j, i, k): 1.0, x_name(i, j): -1.0}
            add_row(f"side_{i + 1}_{j + 1}_{k + 1}", RowFamily.SIDE, expr, Sense.EQ, 0.0)

    # Σ_{k∈N(i)\{j}} y_ik^j + x_ij = 1（両向き）
    for e in edges:
        for i, j in (e, (e[1], e[0])):
            expr = {y_name(i, k, j): 1.0 for k in net.adjacency[i] if k != j}
            expr[x_name(i, j)] = 1.0
            add_row(f"conn_{i + 1}_{j + 1}", RowFamily.CONNECTIVITY, expr, Sense.EQ, 1.0)

    for c in active:
        a, b = c.a, c.b
        tag = f"{a + 1}_{b + 1}"
        on_path = {}
        for i, j in edges:
            on_path[z_name(i, j, a, b)] = (i, j)
            on_path[z_name(j, i, a, b)] = (j, i)
        # 長さ
        if c.length_bounded:
            expr = {z: net.length(*e) for z, e in on_path.items()}
            add_row(f"len_{tag}", RowFamily.LENGTH, expr, Sense.LE, c.max_length_km)
        # ホップ
        if c.hops_bounded:
            add_row(f"hop_{tag}", RowFamily.HOP, {z: 1.0 for z in on_path}, Sense.LE, c.max_hops)
        # z = u·v の4行（u = y_ij^a, v = y_ji^b）
        for z, (i, j) in on_path.items():
            u = _side_term(i, j, a)
            v = _side_term(j, i, b)
            zt = {z: 1.0}
            stem = z[2:]
            add_row(f"lin1_{stem}", RowFamily.LINEARIZATION, _linear((1, zt), (-1, u), (-1, v)), Sense.LE, 0.0)
            add_row(f"lin2_{stem}", RowFamily.LINEARIZATION, _linear((1, zt), (-1, u), (-1, v)), Sense.GE, -1.0)
            add_row(f"lin3_{stem}", RowFamily.LINEARIZATION, _linear((1, zt), (1, u), (-1, v)), Sense.LE, 1.0)
            add_row(f"lin4_{stem}", RowFamily.LINEARIZATION, _linear((1, zt), (-1, u), (1, v)), Sense.LE, 1.0)

    objective = {x_name(i, j): net.costs[(i, j)] for i, j in edges}
    model = IlpModel(net, constraints, tuple(variables), objective, tuple(rows))
    logger.debug("[LP] built model: %d variables, %d rows", len(variables), len(rows))
    return model


# ==================== サイズ ====================

@dataclass(frozen=True)
class SizeReport:
    """閉じた式によるサイズと実際に生成したサイズ"""
    nodes: int
    edges: int
    constraints: int
    formula_variables: int
    formula_constraints: int
    actual_variables: int
    actual_rows: int
    rows_by_family: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "nodes": self.nodes,
            "edges": self.edges,
            "constraint_pairs": self.constraints,
            "formula": {"variables": self.formula_variables, "constraints": self.formula_constraints},
            "generated": {
                "variables": self.actual_variables,
                "rows": self.actual_rows,
                "rows_by_family": self.rows_by_family,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def count_report(net: Network, constraints: ConstraintSet) -> SizeReport:
    """変数数・制約数の閉じた式と、build_model の実数を並べて返す"""
    V, E, C = net.n, len(net.edges), len(constraints)
    model = build_model(net, constraints)
    return SizeReport(
        nodes=V,
        edges=E,
        constraints=C,
        formula_variables=E + E * (V - 2) + 2 * E * C,
        formula_constraints=1 + 2 * E + 9 * C,
        actual_variables=len(model.variables),
        actual_rows=len(model.rows),
        rows_by_family={family.value: count for family, count in model.rows_by_family().items()},
    )


# ==================== LP 出力 ====================

def _num(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def _expression(terms: Iterator[tuple[str, float]], per_line: int = 8) -> str:
    pieces = []
    for k, (var, coef) in enumerate(terms):
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        body = var if mag == 1 else f"{_num(mag)} {var}"
        if k == 0:
            pieces.append(f"- {body}" if coef < 0 else body)
        else:
            pieces.append(f"{sign} {body}")
    lines = [" ".join(pieces[k:k + per_line]) for k in range(0, len(pieces), per_line)]
    return "\n   ".join(lines) if lines else "0"


def export_lp(model: IlpModel) -> str:
    """CPLEX LP 形式のテキスト（決定的）"""
    net = model.net
    out = [
        f"\\ cable tree model: n={net.n} |E|={len(net.edges)} |C|={len(model.constraints)}",
        "Minimize",
        f" obj: {_expression(iter(model.objective.items()))}",
        "Subject To",
    ]
    for row in model.rows:
        out.append(f" {row.name}: {_expression(iter(row.terms))} {row.sense.value} {_num(row.rhs)}")
    out.append("Binaries")
    for k in range(0, len(model.variables), 8):
        out.append(" " + " ".join(model.variables[k:k + 8]))
    out.append("End")
    return "\n".join(out) + "\n"


# ==================== 割当 ====================

@dataclass(frozen=True)
class VariableAssignment:
    """全変数への 0/1 割当"""
    values: Mapping[str, int]

    def __getitem__(self, name: str) -> int:
        return self.values[name]

    def __len__(self) -> int:
        return len(self.values)


def assignment_from_tree(tree: SpanningTree, net: Network, constraints: ConstraintSet) -> VariableAssignment:
    """全域木から x, y, z の割当を作る"""
    if tree.n != net.n or any(e not in net.lengths for e in tree.edges):
        raise FormulationError("tree is not a spanning tree of this network")
    values: dict[str, int] = {}
    sides: dict[tuple[int, int], frozenset[int]] = {}
    for i, j in net.edges:
        in_tree = (i, j) in tree.edges
        values[x_name(i, j)] = int(in_tree)
        if in_tree:
            sides[(i, j)] = tree.side_of(i, j)
            sides[(j, i)] = tree.side_of(j, i)

    def side(i: int, j: int, k: int) -> int:
        # k が j 側なら 1（木に含まれない辺は 0）
        s = sides.get((i, j))
        return int(s is not None and k in s)

    for i, j in net.edges:
        for k in range(net.n):
            if k in (i, j):
                continue
            values[y_name(i, j, k)] = side(i, j, k)
            values[y_name(j, i, k)] = side(j, i, k)
    for c in constraints:
        if not _z_active(c):
            continue
        for i, j in net.edges:
            values[z_name(i, j, c.a, c.b)] = side(i, j, c.a) * side(j, i, c.b)
            values[z_name(j, i, c.a, c.b)] = side(j, i, c.a) * side(i, j, c.b)
    return VariableAssignment(values)


@dataclass(frozen=True)
class Verification:
    """行ごとの検証結果（最初の違反行）"""
    satisfied: bool
    violated_row: Optional[Row] = None
    lhs: Optional[float] = None

    def to_dict(self) -> dict:
        if self.satisfied:
            return {"satisfied": True}
        row = self.violated_row
        return {
            "satisfied": False,
            "row": row.name,
            "family": row.family.value,
            "lhs": self.lhs,
            "sense": row.sense.value,
            "rhs": row.rhs,
        }


def verify_assignment(model: IlpModel, asg: VariableAssignment) -> Verification:
    """全行を順に評価し、最初の違反行を返す"""
    missing = [v for v in model.variables if v not in asg.values]
    if missing:
        raise FormulationError(f"assignment is incomplete: {len(missing)} variables unset (e.g. {missing[0]})")
    for row in model.rows:
        if not row.satisfied_by(asg.values):
            return Verification(False, row, row.lhs(asg.values))
    return Verification(True)


def objective_value(model: IlpModel, asg: VariableAssignment) -> float:
    """Σ c_ij x_ij"""
    return math.fsum(coef * asg[var] for var, coef in model.objective.items())


def decode_tree(model: IlpModel, asg: VariableAssignment) -> SpanningTree:
    """x の値から全域木を復元する"""
    edges = frozenset(e for e in model.net.edges if asg[x_name(*e)] == 1)
    return SpanningTree(model.net.n, edges)


def pair_sums(model: IlpModel, asg: VariableAssignment, c: Constraint) -> tuple[float, int]:
    """制約対の Σ(z_ij+z_ji)·l_ij と Σ(z_ij+z_ji)"""
    length_terms = []
    hops = 0
    for i, j in model.net.edges:
        count = asg[z_name(i, j, c.a, c.b)] + asg[z_name(j, i, c.a, c.b)]
        if count:
            length_terms.extend([model.net.length(i, j)] * count)
            hops += count
    return math.fsum(length_terms), hops
