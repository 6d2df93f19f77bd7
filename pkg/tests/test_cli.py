import csv
import io
import json
from pathlib import Path

import pytest

from src.cli import (
    ENV_RATE,
    EXIT_BUDGET_EXHAUSTED,
    EXIT_INFEASIBLE,
    EXIT_INPUT_ERROR,
    EXIT_OK,
    bench_constraints,
    bench_reference_tree,
    main,
    parse_constraint_spec,
)
from src.heuristic_oracle import random_instance
from src.netmodel import check_constraints, tree_cost
from src.solver import SolveStatus, solve_exact
from src.terrain import GeoPoint, synthetic_grid, write_grid

DATA = Path(__file__).resolve().parent.parent / "src" / "data"
NETWORK = str(DATA / "mediterranean_network.csv")
SITES = str(DATA / "mediterranean_sites.csv")
BD_1100 = str(DATA / "bd_constraints_1100_3.csv")
BD_800 = str(DATA / "bd_constraints_800_2.csv")

MST_CSV = "i,j\nA,F\nD,E\nA,B\nC,F\nE,F\n"


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


# ==================== solve ====================

def test_solve_bd_800(capsys):
    code, out = run(capsys, "solve", "--network", NETWORK, "--constraints", BD_800)
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["status"] == "optimal"
    assert data["total_cost"] == pytest.approx(1517.80)
    assert sorted(map(tuple, data["edges"])) == [("A", "B"), ("A", "F"), ("B", "C"), ("C", "D"), ("D", "E")]
    (check,) = data["constraints"]
    assert check["hops"] == 2


def test_solve_certify(capsys):
    code, out = run(capsys, "solve", "--network", NETWORK, "--constraints", BD_1100, "--certify")
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["formulation_check"] == {"satisfied": True}
    assert data["total_cost"] == pytest.approx(1491.60)


def test_solve_infeasible(tmp_path, capsys):
    constraints = tmp_path / "c.csv"
    constraints.write_text("a,b,max_length_km,max_hops\nB,D,700,\n")
    code, out = run(capsys, "solve", "--network", NETWORK, "--constraints", str(constraints))
    assert code == EXIT_INFEASIBLE
    data = json.loads(out)
    assert data["status"] == "infeasible"
    assert data["edges"] is None
    assert "727.92" in data["reason"]


def test_solve_budget_exhausted(capsys):
    code, out = run(capsys, "solve", "--network", NETWORK, "--constraints", BD_800, "--budget-nodes", "1")
    assert code == EXIT_BUDGET_EXHAUSTED
    assert json.loads(out)["status"] == "budget_exhausted"


def test_solve_writes_out_file_and_geojson(tmp_path, capsys):
    out_file, geo = tmp_path / "solution.json", tmp_path / "tree.geojson"
    code, out = run(
        capsys, "solve", "--network", NETWORK, "--out", str(out_file), "--geojson", str(geo), "--sites", SITES,
    )
    assert code == EXIT_OK
    assert out == ""
    assert json.loads(out_file.read_text())["total_cost"] == pytest.approx(1416.31)
    features = json.loads(geo.read_text())["features"]
    assert sum(f["geometry"]["type"] == "LineString" for f in features) == 5


@pytest.mark.parametrize(
    "argv",
    [
        ["solve"],
        ["solve", "--network", "does-not-exist.csv"],
        ["solve", "--network", NETWORK, "--geojson", "x.geojson"],
        ["solve", "--network", NETWORK, "--rate-per-km", "-1"],
        ["solve", "--network", NETWORK, "--budget-seconds", "0"],
        ["solve", "--network", NETWORK, "--budget-seconds", "abc"],
        ["solve", "--network", NETWORK, "--bogus"],
        ["nosuchcmd"],
        [],
    ],
)
def test_solve_input_errors(argv, capsys):
    code, out = run(capsys, *argv)
    assert code == EXIT_INPUT_ERROR
    assert out == ""


def test_usage_error_is_reported_not_exited(capsys):
    code = main(["solve", "--network", NETWORK, "--budget-seconds", "abc"])
    assert code == EXIT_INPUT_ERROR
    assert "[ERR]" in capsys.readouterr().err


def test_rate_from_environment(tmp_path, monkeypatch, capsys):
    network = tmp_path / "net.csv"
    network.write_text("i,j,length_km\nA,B,10\nB,C,5\nA,C,20\n")
    monkeypatch.setenv(ENV_RATE, "3")
    code, out = run(capsys, "solve", "--network", str(network))
    assert code == EXIT_OK
    assert json.loads(out)["total_cost"] == 45.0
    # フラグが環境変数より優先
    code, out = run(capsys, "solve", "--network", str(network), "--rate-per-km", "2")
    assert json.loads(out)["total_cost"] == 30.0
    monkeypatch.setenv(ENV_RATE, "cheap")
    code, _ = run(capsys, "solve", "--network", str(network))
    assert code == EXIT_INPUT_ERROR


# ==================== oracle / heuristic ====================

def test_oracle_bd_1100(capsys):
    code, out = run(capsys, "oracle", "--network", NETWORK, "--constraints", BD_1100)
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["total_cost"] == pytest.approx(1491.60)
    assert data["stats"]["nodes_expanded"] == 1296


def test_heuristic_unconstrained(capsys):
    code, out = run(capsys, "heuristic", "--network", NETWORK)
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["status"] == "feasible"
    assert data["start"] == "A"
    assert data["total_cost"] == pytest.approx(1416.31)


def test_heuristic_inline_constraint_failure(capsys):
    code, out = run(capsys, "heuristic", "--network", NETWORK, "--constraint", "B,D,700", "--start", "B")
    assert code == EXIT_INFEASIBLE
    data = json.loads(out)
    assert data["status"] == "failed"
    assert data["start"] == "B"


def test_heuristic_sweep(capsys):
    code, out = run(capsys, "heuristic", "--network", NETWORK, "--constraints", BD_1100, "--sweep-starts")
    data = json.loads(out)
    assert len(data["runs"]) == 6
    if code == EXIT_OK:
        assert data["best"]["total_cost"] >= 1491.60 - 1e-9
    else:
        assert code == EXIT_INFEASIBLE and data["best"] is None


def test_heuristic_random_instance(capsys):
    code, out = run(capsys, "heuristic", "--random", "40", "--seed", "3")
    assert code == EXIT_OK
    data = json.loads(out)
    assert len(data["edges"]) == 39


@pytest.mark.parametrize(
    "argv",
    [
        ["heuristic", "--random", "1"],
        ["heuristic", "--random", "5", "--network", NETWORK],
        ["heuristic", "--network", NETWORK, "--constraints", BD_800, "--constraint", "B,D,800,2"],
        ["heuristic", "--network", NETWORK, "--constraint", "B,Z,800"],
        ["heuristic", "--network", NETWORK, "--start", "Q"],
    ],
)
def test_heuristic_input_errors(argv, capsys):
    assert run(capsys, *argv)[0] == EXIT_INPUT_ERROR


def test_parse_constraint_spec(med):
    c = parse_constraint_spec("D,B,800,2", med)
    assert c.pair == (1, 3)
    assert c.max_length_km == 800.0 and c.max_hops == 2
    assert parse_constraint_spec("B,D,,3", med).max_length_km == float("inf")
    with pytest.raises(ValueError):
        parse_constraint_spec("B,D", med)
    with pytest.raises(ValueError):
        parse_constraint_spec("B,D,far", med)


# ==================== export-lp / count / check ====================

def test_export_lp_to_file(tmp_path, capsys):
    lp = tmp_path / "model.lp"
    code, _ = run(capsys, "export-lp", "--network", NETWORK, "--constraints", BD_800, "--out", str(lp))
    assert code == EXIT_OK
    text = lp.read_text()
    assert text.startswith("\\ cable tree model: n=6")
    assert "Subject To" in text and "Binaries" in text
    assert text.rstrip().endswith("End")


def test_count(capsys):
    code, out = run(capsys, "count", "--network", NETWORK, "--constraints", BD_1100)
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["formula"] == {"variables": 105, "constraints": 40}
    assert data["generated"]["variables"] == 165
    assert data["generated"]["rows"] == 213


def test_check_mst_against_constraints(tmp_path, capsys):
    tree = tmp_path / "mst.csv"
    tree.write_text(MST_CSV)
    code, out = run(capsys, "check", "--network", NETWORK, "--tree", str(tree))
    assert code == EXIT_OK
    assert json.loads(out)["satisfied"] is True

    code, out = run(capsys, "check", "--network", NETWORK, "--tree", str(tree), "--constraints", BD_1100)
    assert code == EXIT_INFEASIBLE
    data = json.loads(out)
    assert data["satisfied"] is False
    assert data["total_cost"] == pytest.approx(1416.31)
    assert data["formulation_check"]["satisfied"] is False
    assert data["formulation_check"]["family"] in ("length", "hop")


def test_check_requires_tree(capsys):
    assert run(capsys, "check", "--network", NETWORK)[0] == EXIT_INPUT_ERROR


# ==================== bench ====================

def test_bench_csv(capsys):
    code, out = run(capsys, "bench", "--sizes", "4-5", "--density", "0.5", "--seed", "2", "--repeats", "2")
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["n"]) for r in rows] == [4, 5]
    assert [int(r["constraints"]) for r in rows] == [3, 5]
    assert all(int(r["runs"]) == 2 for r in rows)
    assert all(r["status"] == "optimal" for r in rows)
    assert all(1 <= float(r["nodes_expanded"]) <= int(r["max_nodes"]) for r in rows)


@pytest.mark.parametrize("seed", range(5))
def test_bench_constraints_keep_reference_tree_feasible(seed):
    net = random_instance(7, seed=seed)
    constraints = bench_constraints(net, 1.0, 1.0, seed)
    assert len(constraints) == 21
    reference = bench_reference_tree(net)
    assert check_constraints(reference, net, constraints).satisfied
    outcome = solve_exact(net, constraints)
    assert outcome.status is SolveStatus.OPTIMAL
    assert outcome.cost <= tree_cost(reference, net)


@pytest.mark.slow
def test_bench_nodes_grow_with_size(capsys):
    code, out = run(capsys, "bench", "--sizes", "4-8", "--seed", "0")
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out)))
    assert all(r["status"] == "optimal" for r in rows)
    assert all(float(r["wall_seconds"]) < 60.0 for r in rows)
    nodes = [float(r["nodes_expanded"]) for r in rows]
    assert nodes[-1] > nodes[0]


@pytest.mark.parametrize("sizes", ["4-12", "1,2", "four"])
def test_bench_rejects_sizes(sizes, capsys):
    assert run(capsys, "bench", "--sizes", sizes)[0] == EXIT_INPUT_ERROR


# ==================== costs ====================

@pytest.fixture
def sea(tmp_path):
    grid = synthetic_grid(41, 41, origin=GeoPoint(-0.2, 10.0), walls=[(slice(0, 30), slice(20, 21))])
    grid_file = tmp_path / "sea.asc"
    grid_file.write_text(write_grid(grid))
    sites = tmp_path / "sites.csv"
    points = [grid.cell_center(5, 5), grid.cell_center(5, 35), grid.cell_center(35, 20)]
    sites.write_text("id,name,lat,lon\n" + "".join(
        f"{label},{label},{p.lat!r},{p.lon!r}\n" for label, p in zip("PQR", points)
    ))
    return grid, grid_file, sites


def test_costs_great_circle(capsys):
    code, out = run(capsys, "costs", "--sites", SITES, "--method", "great-circle")
    assert code == EXIT_OK
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["i", "j", "length_km"]
    assert len(rows) == 1 + 15


def test_costs_fmm_with_paths(sea, tmp_path, capsys):
    _, grid_file, sites = sea
    geo = tmp_path / "paths.geojson"
    code, out = run(capsys, "costs", "--grid", str(grid_file), "--sites", str(sites), "--geojson", str(geo))
    assert code == EXIT_OK
    lengths = {(r[0], r[1]): float(r[2]) for r in list(csv.reader(io.StringIO(out)))[1:]}
    assert set(lengths) == {("P", "Q"), ("P", "R"), ("Q", "R")}
    features = json.loads(geo.read_text())["features"]
    assert len(features) == 3

    # そのまま solve の入力になる
    network = tmp_path / "net.csv"
    network.write_text(out)
    code, solved = run(capsys, "solve", "--network", str(network), "--rate-per-km", "1")
    assert code == EXIT_OK
    assert len(json.loads(solved)["edges"]) == 2


def test_costs_site_on_land(sea, tmp_path, capsys):
    grid, grid_file, _ = sea
    sites = tmp_path / "land.csv"
    p, q = grid.cell_center(10, 20), grid.cell_center(5, 5)
    sites.write_text(f"L,Land,{p.lat!r},{p.lon!r}\nS,Sea,{q.lat!r},{q.lon!r}\n")
    assert run(capsys, "costs", "--grid", str(grid_file), "--sites", str(sites))[0] == EXIT_INPUT_ERROR


def test_costs_fmm_requires_grid(capsys):
    assert run(capsys, "costs", "--sites", SITES)[0] == EXIT_INPUT_ERROR


def test_bench_rejects_zero_repeats(capsys):
    assert run(capsys, "bench", "--sizes", "4", "--repeats", "0")[0] == EXIT_INPUT_ERROR
