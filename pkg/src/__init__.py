# Cable Planner v0.1
from .terrain import GeoPoint, Site, TerrainGrid, great_circle_km, load_grid, read_grid, synthetic_grid
from .fmm import ArrivalField, GeoPolyline, pairwise_lengths, solve_arrival, trace_path
from .netmodel import (
    Constraint, ConstraintSet, CostMatrix, Network, SpanningTree,
    check_constraints, tree_cost, tree_path, read_network, read_constraints,
)
from .formulation import (
    IlpModel, VariableAssignment,
    build_model, count_report, export_lp, assignment_from_tree, verify_assignment,
)
from .solver import SolveOutcome, SolveStatus, kruskal_bound, solve_exact
from .heuristic_oracle import (
    HeuristicOutcome, prim_constrained, enumerate_trees, brute_force_optimum, random_instance,
)

__all__ = [
    # Terrain
    "GeoPoint", "Site", "TerrainGrid", "great_circle_km", "load_grid", "read_grid", "synthetic_grid",
    # FMM
    "ArrivalField", "GeoPolyline", "pairwise_lengths", "solve_arrival", "trace_path",
    # Network
    "Constraint", "ConstraintSet", "CostMatrix", "Network", "SpanningTree",
    "check_constraints", "tree_cost", "tree_path", "read_network", "read_constraints",
    # Formulation
    "IlpModel", "VariableAssignment",
    "build_model", "count_report", "export_lp", "assignment_from_tree", "verify_assignment",
    # Solver
    "SolveOutcome", "SolveStatus", "kruskal_bound", "solve_exact",
    # Heuristic / oracle
    "HeuristicOutcome", "prim_constrained", "enumerate_trees", "brute_force_optimum", "random_instance",
]
