#!/usr/bin/env python3
"""
Cable Planner CLI
地形 → ケーブル長 → 制約付き木の計算 → レポート を繋ぐコマンドラインツール
"""

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import networkx as nx
import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from .fmm import pairwise_lengths
from .formulation import assignment_from_tree, build_model, count_report, export_lp, verify_assignment
from .geojson_io import great_circle_chord, matrix_collection, parse_paths, tree_collection, write_json
from .heuristic_oracle import brute_force_optimum, prim_constrained, random_instance, sweep_starts
from .netmodel import (
    DEFAULT_RATE_PER_KM,
    Constraint,
    ConstraintSet,
    Network,
    SpanningTree,
    check_constraints,
    edge_key,
    parse_tree,
    read_constraints,
    read_network,
    tree_cost,
    tree_path,
)
from .solver import DEFAULT_BUDGET_NODES, DEFAULT_BUDGET_SECONDS, Budget, SolveStatus, solve_exact
from .terrain import EARTH_RADIUS_KM, great_circle_matrix, read_grid, read_sites, resample_grid

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_BUDGET_EXHAUSTED = 3

ENV_RATE = "CABLE_PLANNER_RATE_PER_KM"
ENV_RADIUS = "CABLE_PLANNER_EARTH_RADIUS_KM"
ENV_BUDGET = "CABLE_PLANNER_BUDGET_SECONDS"

MAX_BENCH_NODES = 10


def setup_logging(verbose: bool = False) -> None:
    """stderr に RichHandler を設定（stdout は JSON 出力用に空けておく）"""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_time=False, show_path=False, markup=False)],
        force=True,
    )


def env_float(name: str, default: float) -> float:
    value = os.environ.get(name)
    if value is None or value == "":
        return default
    try:
        return float(value)
    except ValueError:
        raise ValueError(f"environment variable {name} must be a number, got {value!r}") from None


# ==================== 設定 ====================

@dataclass
class RunConfig:
    """解決済みのフラグと入力パス"""
    command: str
    grid: Optional[Path] = None
    sites: Optional[Path] = None
    network: Optional[Path] = None
    constraints: Optional[Path] = None
    tree: Optional[Path] = None
    paths: Optional[Path] = None
    out: Optional[Path] = None
    geojson: Optional[Path] = None
    method: str = "fmm"
    resolution: Optional[float] = None
    land_traversable: bool = False
    workers: int = 1
    rate_per_km: float = DEFAULT_RATE_PER_KM
    earth_radius_km: float = EARTH_RADIUS_KM
    budget_seconds: float = DEFAULT_BUDGET_SECONDS
    budget_nodes: int = DEFAULT_BUDGET_NODES
    seed: int = 0
    start: Optional[str] = None
    sweep_starts: bool = False
    random_nodes: Optional[int] = None
    constraint_specs: list[str] = field(default_factory=list)
    sizes: list[int] = field(default_factory=list)
    density: float = 1.0
    slack: float = 1.0
    repeats: int = 3
    certify: bool = False
    verbose: bool = False

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        """argparse と環境変数から構築（フラグが優先）"""
        def opt_path(name):
            value = getattr(args, name, None)
            return Path(value) if value else None

        rate = getattr(args, "rate_per_km", None)
        radius = getattr(args, "earth_radius_km", None)
        budget = getattr(args, "budget_seconds", None)
        return cls(
            command=args.command,
            grid=opt_path("grid"),
            sites=opt_path("sites"),
            network=opt_path("network"),
            constraints=opt_path("constraints"),
            tree=opt_path("tree"),
            paths=opt_path("paths"),
            out=opt_path("out"),
            geojson=opt_path("geojson"),
            method=getattr(args, "method", "fmm"),
            resolution=getattr(args, "resolution", None),
            land_traversable=getattr(args, "land_traversable", False),
            workers=getattr(args, "workers", 1),
            rate_per_km=rate if rate is not None else env_float(ENV_RATE, DEFAULT_RATE_PER_KM),
            earth_radius_km=radius if radius is not None else env_float(ENV_RADIUS, EARTH_RADIUS_KM),
            budget_seconds=budget if budget is not None else env_float(ENV_BUDGET, DEFAULT_BUDGET_SECONDS),
            budget_nodes=getattr(args, "budget_nodes", DEFAULT_BUDGET_NODES),
            seed=getattr(args, "seed", 0),
            start=getattr(args, "start", None),
            sweep_starts=getattr(args, "sweep_starts", False),
            random_nodes=getattr(args, "random", None),
            constraint_specs=list(getattr(args, "constraint", None) or []),
            sizes=_parse_sizes(getattr(args, "sizes", None)),
            density=getattr(args, "density", 1.0),
            slack=getattr(args, "slack", 1.0),
            repeats=getattr(args, "repeats", 3),
            certify=getattr(args, "certify", False),
            verbose=args.verbose,
        )

    def validate(self) -> None:
        """サブコマンドごとの必須入力と数値範囲を、処理前に確認する"""
        if not (self.rate_per_km > 0):
            raise ValueError(f"--rate-per-km must be positive, got {self.rate_per_km}")
        if not (self.earth_radius_km > 0):
            raise ValueError(f"--earth-radius-km must be positive, got {self.earth_radius_km}")
        if not (self.budget_seconds > 0):
            raise ValueError(f"--budget-seconds must be positive, got {self.budget_seconds}")
        if self.resolution is not None and not (self.resolution > 0):
            raise ValueError(f"--resolution must be positive, got {self.resolution}")
        if self.workers < 1:
            raise ValueError(f"--workers must be at least 1, got {self.workers}")

        if self.command == "costs":
            self._require("sites")
            if self.method == "fmm":
                self._require("grid")
        elif self.command == "heuristic":
            if self.random_nodes is None:
                self._require("network")
            elif self.network is not None:
                raise ValueError("--random and --network are mutually exclusive")
            elif self.random_nodes < 2:
                raise ValueError(f"--random needs at least 2 nodes, got {self.random_nodes}")
            if self.constraints is not None and self.constraint_specs:
                raise ValueError("use either --constraints or --constraint, not both")
        elif self.command == "bench":
            if not self.sizes:
                raise ValueError("--sizes is required")
            if min(self.sizes) < 2 or max(self.sizes) > MAX_BENCH_NODES:
                raise ValueError(f"bench sizes must lie in 2..{MAX_BENCH_NODES}")
            if not 0.0 <= self.density <= 1.0:
                raise ValueError(f"--density must lie in [0, 1], got {self.density}")
            if not (self.slack >= 1.0):
                raise ValueError(f"--slack must be at least 1, got {self.slack}")
            if self.repeats < 1:
                raise ValueError(f"--repeats must be at least 1, got {self.repeats}")
        else:
            self._require("network")
            if self.command == "check":
                self._require("tree")
        if self.geojson is not None and self.command in ("solve", "oracle", "heuristic"):
            self._require("sites")

        for name in ("grid", "sites", "network", "constraints", "tree", "paths"):
            path = getattr(self, name)
            if path is not None and not path.is_file():
                raise ValueError(f"--{name} file not found: {path}")

    def _require(self, name: str) -> None:
        if getattr(self, name) is None:
            raise ValueError(f"'{self.command}' requires --{name}")


def _parse_sizes(text: Optional[str]) -> list[int]:
    """'4-8' または '4,5,6'"""
    if not text:
        return []
    try:
        if "-" in text:
            lo, hi = (int(part) for part in text.split("-", 1))
            return list(range(lo, hi + 1))
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ValueError(f"--sizes must look like '4-8' or '4,5,6', got {text!r}") from None


def parse_constraint_spec(spec: str, net: Network) -> Constraint:
    """'a,b,max_length_km[,max_hops]'（空欄 = 無制限）"""
    parts = [part.strip() for part in spec.split(",")]
    if len(parts) not in (3, 4):
        raise ValueError(f"--constraint expects a,b,length[,hops], got {spec!r}")
    try:
        max_length = float(parts[2]) if parts[2] else math.inf
        max_hops = int(parts[3]) if len(parts) == 4 and parts[3] else math.inf
    except ValueError:
        raise ValueError(f"--constraint has a bad threshold: {spec!r}") from None
    return Constraint(net.index(parts[0]), net.index(parts[1]), max_length, max_hops)


def bench_reference_tree(net: Network) -> SpanningTree:
    """ベンチの参照木: 距離和が最小のノードを根とする最短路木"""
    graph = net.to_graph()
    dist = dict(nx.all_pairs_dijkstra_path_length(graph, weight="weight"))
    root = min(range(net.n), key=lambda k: (math.fsum(dist[k].values()), k))
    preds, _ = nx.dijkstra_predecessor_and_distance(graph, root, weight="weight")
    return SpanningTree(net.n, frozenset(edge_key(v, min(p)) for v, p in preds.items() if p))


def bench_constraints(net: Network, density: float, slack: float, seed: int) -> ConstraintSet:
    """ベンチ用の制約: 対の density 割合に、参照木上の経路長の slack 倍を長さ上限に置く

    slack >= 1 なら参照木が常に実行可能。上限は最短路以上で、最小全域木の
    長い経路はたいてい違反する。
    """
    pairs = [(i, j) for i in range(net.n) for j in range(i + 1, net.n)]
    count = round(density * len(pairs))
    if count == len(pairs):
        chosen = pairs
    else:
        rng = np.random.default_rng([seed, net.n])
        chosen = [pairs[int(k)] for k in sorted(rng.choice(len(pairs), size=count, replace=False))]
    reference = bench_reference_tree(net)
    return ConstraintSet(tuple(
        Constraint(a, b, slack * tree_path(reference, net, a, b).length_km) for a, b in chosen
    ))


# ==================== CLI ====================

class CablePlannerCLI:
    """サブコマンドの実行と結果の表示"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.console = Console(stderr=True)

    def print(self, message: str, style: Optional[str] = None):
        self.console.print(message, style=style, markup=False, highlight=False)

    def print_success(self, message: str):
        self.print(f"[OK] {message}", style="green")

    def print_warning(self, message: str):
        self.print(f"[WARN] {message}", style="yellow")

    def print_error(self, message: str):
        self.print(f"[ERR] {message}", style="red")

    def emit(self, text: str) -> None:
        """--out があればファイルへ、なければ stdout へ"""
        if self.config.out is not None:
            self.config.out.write_text(text, encoding="utf-8")
            self.print_success(f"wrote {self.config.out}")
        else:
            sys.stdout.write(text)

    def emit_json(self, data: dict) -> None:
        self.emit(json.dumps(data, indent=2) + "\n")

    def run(self) -> int:
        handler = getattr(self, "cmd_" + self.config.command.replace("-", "_"))
        return handler()

    # ---------- 入力 ----------

    def load_network(self) -> Network:
        return read_network(self.config.network, self.config.rate_per_km)

    def load_constraints(self, net: Network) -> ConstraintSet:
        if self.config.constraints is None:
            return ConstraintSet()
        return read_constraints(self.config.constraints, net)

    def write_tree_geojson(self, net: Network, edges) -> None:
        if self.config.geojson is None:
            return
        sites = read_sites(self.config.sites)
        paths = parse_paths(self.config.paths.read_text(encoding="utf-8"), net) if self.config.paths else None
        write_json(tree_collection(net, edges, sites, paths), self.config.geojson)
        self.print_success(f"wrote {self.config.geojson}")

    # ---------- 表示 ----------

    def show_tree(self, title: str, net: Network, outcome) -> None:
        table = Table(title=title)
        table.add_column("Edge", style="cyan")
        table.add_column("Length (km)", justify="right")
        table.add_column("Cost", justify="right", style="green")
        for e in outcome.tree.sorted_edges():
            table.add_row(net.edge_label(e), f"{net.lengths[e]:.2f}", f"{net.costs[e]:.2f}")
        table.add_row("total", "", f"{outcome.cost:.2f}", style="bold")
        self.console.print(table)
        for check in outcome.report.checks:
            mark = "[OK]" if check.satisfied else "[ERR]"
            self.print(
                f"{mark} {check.path.describe(net)}: {check.path.length_km:.2f} km, {check.path.hops} hops",
                style="green" if check.satisfied else "red",
            )

    # ---------- サブコマンド ----------

    def cmd_costs(self) -> int:
        """サイト間のケーブル長行列（CSV）と経路（GeoJSON）"""
        cfg = self.config
        sites = read_sites(cfg.sites)
        labels = [s.id for s in sites]
        if cfg.method == "fmm":
            grid = read_grid(cfg.grid, land_traversable=cfg.land_traversable)
            if cfg.resolution is not None:
                grid = resample_grid(grid, cfg.resolution)
            matrix = pairwise_lengths(
                grid,
                [s.point for s in sites],
                radius_km=cfg.earth_radius_km,
                labels=labels,
                with_paths=cfg.geojson is not None,
                workers=cfg.workers,
            )
        else:
            matrix = great_circle_matrix(sites, cfg.earth_radius_km, labels)
            if cfg.geojson is not None:
                for i, j, _ in matrix.pairs():
                    matrix.paths[(i, j)] = great_circle_chord(
                        sites[i].point, sites[j].point, radius_km=cfg.earth_radius_km
                    )
        self.emit(matrix.to_csv())
        if cfg.geojson is not None:
            write_json(matrix_collection(matrix), cfg.geojson)
            self.print_success(f"wrote {cfg.geojson}")
        self.print_success(f"{len(labels) * (len(labels) - 1) // 2} pair lengths ({matrix.method})")
        return EXIT_OK

    def cmd_solve(self) -> int:
        """分枝限定法で厳密解を求める"""
        cfg = self.config
        net = self.load_network()
        constraints = self.load_constraints(net)
        outcome = solve_exact(net, constraints, Budget(cfg.budget_seconds, cfg.budget_nodes))
        data = outcome.to_dict(net)
        if cfg.certify and outcome.tree is not None:
            model = build_model(net, constraints)
            data["formulation_check"] = verify_assignment(
                model, assignment_from_tree(outcome.tree, net, constraints)
            ).to_dict()
        self.emit_json(data)
        if outcome.status is SolveStatus.INFEASIBLE:
            self.print_warning(f"infeasible: {outcome.reason}")
            return EXIT_INFEASIBLE
        if outcome.tree is not None:
            title = "Optimal tree" if outcome.status is SolveStatus.OPTIMAL else "Best incumbent"
            self.show_tree(title, net, outcome)
            self.write_tree_geojson(net, outcome.tree.edges)
        if outcome.status is SolveStatus.BUDGET_EXHAUSTED:
            self.print_warning(outcome.reason)
            return EXIT_BUDGET_EXHAUSTED
        return EXIT_OK

    def cmd_oracle(self) -> int:
        """全列挙による最適解"""
        net = self.load_network()
        constraints = self.load_constraints(net)
        outcome = brute_force_optimum(net, constraints)
        self.emit_json(outcome.to_dict(net))
        if outcome.status is SolveStatus.INFEASIBLE:
            self.print_warning(f"infeasible: {outcome.reason}")
            return EXIT_INFEASIBLE
        self.show_tree(f"Oracle optimum over {outcome.stats.nodes_expanded} trees", net, outcome)
        self.write_tree_geojson(net, outcome.tree.edges)
        return EXIT_OK

    def cmd_heuristic(self) -> int:
        """Prim ベースのヒューリスティック"""
        cfg = self.config
        if cfg.random_nodes is not None:
            net = random_instance(cfg.random_nodes, cfg.seed)
        else:
            net = self.load_network()
        if cfg.constraint_specs:
            constraints = ConstraintSet(tuple(parse_constraint_spec(s, net) for s in cfg.constraint_specs))
        else:
            constraints = self.load_constraints(net)

        if cfg.sweep_starts:
            sweep = sweep_starts(net, constraints)
            self.emit_json(sweep.to_dict(net))
            outcome = sweep.best
            failed = sum(1 for r in sweep.runs if not r.feasible)
            if failed:
                self.print_warning(f"{failed} of {net.n} start nodes failed")
        else:
            start = net.index(cfg.start) if cfg.start is not None else 0
            outcome = prim_constrained(net, constraints, start)
            self.emit_json(outcome.to_dict(net))

        if outcome is None or not outcome.feasible:
            reason = outcome.reason if outcome is not None else "every start node failed"
            self.print_warning(f"heuristic failed: {reason}")
            return EXIT_INFEASIBLE
        if net.n <= 20:
            self.show_tree(f"Heuristic tree from {net.labels[outcome.start]}", net, outcome)
        else:
            self.print_success(f"heuristic cost {outcome.cost:.2f} from start {net.labels[outcome.start]}")
            for check in outcome.report.checks:
                self.print(f"    {check.path.describe(net)}: {check.path.length_km:.2f} km, {check.path.hops} hops")
        self.write_tree_geojson(net, outcome.tree.edges)
        return EXIT_OK

    def cmd_export_lp(self) -> int:
        """ILP を LP 形式で書き出す"""
        net = self.load_network()
        model = build_model(net, self.load_constraints(net))
        self.emit(export_lp(model))
        self.print_success(f"{len(model.variables)} binaries, {len(model.rows)} rows")
        return EXIT_OK

    def cmd_count(self) -> int:
        """モデルサイズ（閉じた式と実数）"""
        net = self.load_network()
        report = count_report(net, self.load_constraints(net))
        self.emit(report.to_json() + "\n")
        table = Table(title="Model size")
        table.add_column("", style="cyan")
        table.add_column("Formula", justify="right")
        table.add_column("Generated", justify="right", style="green")
        table.add_row("variables", str(report.formula_variables), str(report.actual_variables))
        table.add_row("constraints", str(report.formula_constraints), str(report.actual_rows))
        self.console.print(table)
        return EXIT_OK

    def cmd_check(self) -> int:
        """与えられた木の制約判定と定式化の行チェック"""
        net = self.load_network()
        constraints = self.load_constraints(net)
        tree = parse_tree(self.config.tree.read_text(encoding="utf-8"), net)
        report = check_constraints(tree, net, constraints)
        verification = verify_assignment(build_model(net, constraints), assignment_from_tree(tree, net, constraints))
        self.emit_json({
            "satisfied": report.satisfied,
            "total_cost": tree_cost(tree, net),
            "constraints": report.to_dict(net),
            "formulation_check": verification.to_dict(),
        })
        if not report.satisfied:
            for check in report.violations:
                self.print_error(
                    f"{check.path.describe(net)}: {check.path.length_km:.2f} km, {check.path.hops} hops"
                )
            return EXIT_INFEASIBLE
        self.print_success("tree satisfies every constraint")
        return EXIT_OK

    def cmd_bench(self) -> int:
        """サイズ別の探索ノード数と実行時間 CSV（repeats 個の乱数インスタンスの平均）"""
        cfg = self.config
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "constraints", "runs", "nodes_expanded", "max_nodes", "wall_seconds", "status"])
        budget = Budget(cfg.budget_seconds, cfg.budget_nodes)
        severity = [SolveStatus.OPTIMAL, SolveStatus.INFEASIBLE, SolveStatus.BUDGET_EXHAUSTED]
        with Progress(SpinnerColumn(), TextColumn("{task.description}"), console=self.console, transient=True) as progress:
            task = progress.add_task("bench", total=len(cfg.sizes) * cfg.repeats)
            for n in cfg.sizes:
                outcomes = []
                for r in range(cfg.repeats):
                    progress.update(task, description=f"n={n} run {r + 1}/{cfg.repeats}")
                    net = random_instance(n, seed=cfg.seed + 1000 * r + n)
                    constraints = bench_constraints(net, cfg.density, cfg.slack, cfg.seed + r)
                    outcomes.append(solve_exact(net, constraints, budget))
                    progress.advance(task)
                nodes = [o.stats.nodes_expanded for o in outcomes]
                worst = max((o.status for o in outcomes), key=severity.index)
                writer.writerow([
                    n,
                    len(constraints),
                    len(outcomes),
                    f"{np.mean(nodes):.1f}",
                    max(nodes),
                    f"{np.mean([o.stats.elapsed_seconds for o in outcomes]):.6f}",
                    worst.value,
                ])
                if worst is SolveStatus.BUDGET_EXHAUSTED:
                    self.print_warning(f"n={n}: budget exhausted")
        self.emit(buf.getvalue())
        return EXIT_OK


# ==================== 引数 ====================

class _ArgumentParser(argparse.ArgumentParser):
    """使い方の誤りを ValueError にする（終了コード 2 は実行不能用）"""

    def error(self, message: str):
        raise ValueError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="cable-planner", description="Submarine cable tree planner")
    parser.add_argument("-v", "--verbose", action="store_true", help="DEBUG ログを表示")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, network=True, constraints=True):
        if network:
            p.add_argument("--network", help="network CSV (i,j,length_km[,cost])")
        if constraints:
            p.add_argument("--constraints", help="constraint CSV (a,b,max_length_km,max_hops)")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--rate-per-km", type=float, help="cost per km when the network has no cost column")

    def budget(p):
        p.add_argument("--budget-seconds", type=float, help="solver time limit")
        p.add_argument("--budget-nodes", type=int, default=DEFAULT_BUDGET_NODES, help="solver node limit")

    def geo(p):
        p.add_argument("--geojson", help="write the chosen tree as GeoJSON")
        p.add_argument("--sites", help="site CSV (id,name,lat,lon) for --geojson")
        p.add_argument("--paths", help="pair paths GeoJSON from 'costs'")

    p = sub.add_parser("costs", help="pairwise cable lengths between sites")
    p.add_argument("--grid", help="ASCII bathymetry grid")
    p.add_argument("--sites", help="site CSV (id,name,lat,lon)")
    p.add_argument("--method", choices=["fmm", "great-circle"], default="fmm")
    p.add_argument("--resolution", type=float, help="resample the grid to this cell size (degrees)")
    p.add_argument("--land-traversable", action="store_true", help="only mask no-data cells")
    p.add_argument("--earth-radius-km", type=float)
    p.add_argument("--workers", type=int, default=1, help="solve arrival fields in parallel")
    p.add_argument("--geojson", help="write per-pair paths as GeoJSON")
    p.add_argument("--out", help="output CSV (default: stdout)")

    p = sub.add_parser("solve", help="exact branch-and-bound optimum")
    common(p)
    budget(p)
    geo(p)
    p.add_argument("--certify", action="store_true", help="check the optimum against the ILP rows")

    p = sub.add_parser("oracle", help="exhaustive optimum (n <= 10)")
    common(p)
    geo(p)

    p = sub.add_parser("heuristic", help="Prim-based constrained heuristic")
    common(p)
    geo(p)
    p.add_argument("--random", type=int, metavar="N", help="generate an N-node random instance instead")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--constraint", action="append", metavar="A,B,LEN[,HOPS]", help="inline constraint (repeatable)")
    p.add_argument("--start", help="start node label (default: first node)")
    p.add_argument("--sweep-starts", action="store_true", help="try every start node and keep the best")

    p = sub.add_parser("export-lp", help="write the ILP in LP format")
    common(p)

    p = sub.add_parser("count", help="model size report")
    common(p)

    p = sub.add_parser("check", help="check a given tree against the constraints")
    common(p)
    p.add_argument("--tree", help="tree edge CSV (i,j)")

    p = sub.add_parser("bench", help="solver run-time over random instances")
    p.add_argument("--sizes", default="4-8", help="node counts, '4-8' or '4,5,6'")
    p.add_argument("--density", type=float, default=1.0, help="fraction of node pairs constrained")
    p.add_argument("--slack", type=float, default=1.0, help="length threshold as a multiple of the reference tree path")
    p.add_argument("--repeats", type=int, default=3, help="random instances per size (averaged)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output CSV (default: stdout)")
    budget(p)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    """エントリーポイント"""
    console = Console(stderr=True)
    try:
        args = build_parser().parse_args(argv)
        setup_logging(args.verbose)
        config = RunConfig.from_args(args)
        config.validate()
        return CablePlannerCLI(config).run()
    except (ValueError, OSError) as e:
        console.print(f"[ERR] {e}", style="red", markup=False, highlight=False)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
