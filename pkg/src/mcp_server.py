#!/usr/bin/env python3
"""
Cable Planner MCP Server
MCP クライアントから制約付きケーブル網の計算を呼び出すためのサーバー
"""

import asyncio
import json
import logging
import math
import os
from typing import Optional

import mcp.server.stdio
import mcp.types as types
from mcp.server import NotificationOptions, Server
from mcp.server.models import InitializationOptions

from .cli import ENV_BUDGET, ENV_RADIUS, ENV_RATE, env_float, setup_logging
from .formulation import assignment_from_tree, build_model, count_report, export_lp, verify_assignment
from .heuristic_oracle import prim_constrained, sweep_starts
from .netmodel import (
    DEFAULT_RATE_PER_KM,
    Constraint,
    ConstraintSet,
    Network,
    SpanningTree,
    case_study_network,
    check_constraints,
    parse_network,
    tree_cost,
)
from .solver import DEFAULT_BUDGET_SECONDS, Budget, solve_exact
from .terrain import EARTH_RADIUS_KM, GeoPoint, great_circle_km

logger = logging.getLogger(__name__)

CASE_STUDY_URI = "cable://case-study/mediterranean"


class PlannerState:
    """サーバー全体の設定と読み込み済みケーススタディ"""

    def __init__(self):
        self.rate_per_km = env_float(ENV_RATE, DEFAULT_RATE_PER_KM)
        self.earth_radius_km = env_float(ENV_RADIUS, EARTH_RADIUS_KM)
        self.budget_seconds = env_float(ENV_BUDGET, DEFAULT_BUDGET_SECONDS)
        self._case_study: Optional[Network] = None

    @property
    def case_study(self) -> Network:
        if self._case_study is None:
            self._case_study = case_study_network()
        return self._case_study

    def network(self, args: dict) -> Network:
        """network_csv があればそれを、なければケーススタディを使う"""
        text = args.get("network_csv")
        if text:
            return parse_network(text, args.get("rate_per_km", self.rate_per_km))
        return self.case_study


state = PlannerState()
server = Server("cable-planner")


def _constraints(net: Network, items: Optional[list]) -> ConstraintSet:
    entries = []
    for item in items or []:
        max_length = item.get("max_length_km")
        max_hops = item.get("max_hops")
        entries.append(Constraint(
            net.index(item["a"]),
            net.index(item["b"]),
            math.inf if max_length is None else float(max_length),
            math.inf if max_hops is None else int(max_hops),
        ))
    constraints = ConstraintSet(tuple(entries))
    constraints.validate(net)
    return constraints


_NETWORK_PROPS = {
    "network_csv": {
        "type": "string",
        "description": "ネットワーク CSV（i,j,length_km[,cost]）。省略時は地中海ケーススタディ",
    },
    "constraints": {
        "type": "array",
        "description": "ノード対の長さ・ホップ上限",
        "items": {
            "type": "object",
            "properties": {
                "a": {"type": "string"},
                "b": {"type": "string"},
                "max_length_km": {"type": "number"},
                "max_hops": {"type": "integer"},
            },
            "required": ["a", "b"],
        },
    },
}


# ==================== ツール定義 ====================

@server.list_tools()
async def handle_list_tools() -> list[types.Tool]:
    """利用可能なツール一覧"""
    return [
        types.Tool(
            name="solve_network",
            description="制約付き最小費用の全域木を分枝限定法で厳密に求める",
            inputSchema={
                "type": "object",
                "properties": {
                    **_NETWORK_PROPS,
                    "budget_seconds": {"type": "number", "description": "探索の時間上限（秒）"},
                },
                "required": [],
            },
        ),
        types.Tool(
            name="run_heuristic",
            description="Prim ベースのヒューリスティックで制約付きの木を作る",
            inputSchema={
                "type": "object",
                "properties": {
                    **_NETWORK_PROPS,
                    "start": {"type": "string", "description": "開始ノードのラベル"},
                    "sweep": {"type": "boolean", "description": "全開始ノードを試す"},
                },
                "required": [],
            },
        ),
        types.Tool(
            name="check_tree",
            description="与えた木の各制約対の経路長・ホップ数と ILP 行の充足を調べる",
            inputSchema={
                "type": "object",
                "properties": {
                    **_NETWORK_PROPS,
                    "edges": {
                        "type": "array",
                        "items": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2},
                        "description": "木の辺 [[a, b], ...]",
                    },
                },
                "required": ["edges"],
            },
        ),
        types.Tool(
            name="count_model",
            description="ILP の変数数・制約数（式による値と生成した実数）",
            inputSchema={"type": "object", "properties": dict(_NETWORK_PROPS), "required": []},
        ),
        types.Tool(
            name="export_lp",
            description="ILP を LP 形式テキストで返す",
            inputSchema={"type": "object", "properties": dict(_NETWORK_PROPS), "required": []},
        ),
        types.Tool(
            name="great_circle",
            description="2地点間の大円距離（km）",
            inputSchema={
                "type": "object",
                "properties": {
                    "lat1": {"type": "number"},
                    "lon1": {"type": "number"},
                    "lat2": {"type": "number"},
                    "lon2": {"type": "number"},
                },
                "required": ["lat1", "lon1", "lat2", "lon2"],
            },
        ),
    ]


@server.call_tool()
async def handle_call_tool(name: str, arguments: dict | None) -> list[types.TextContent]:
    """ツール実行"""
    args = arguments or {}

    try:
        if name == "solve_network":
            net = state.network(args)
            constraints = _constraints(net, args.get("constraints"))
            budget = Budget(seconds=float(args.get("budget_seconds", state.budget_seconds)))
            outcome = solve_exact(net, constraints, budget)
            result = json.dumps(outcome.to_dict(net), indent=2)

        elif name == "run_heuristic":
            net = state.network(args)
            constraints = _constraints(net, args.get("constraints"))
            if args.get("sweep"):
                result = json.dumps(sweep_starts(net, constraints).to_dict(net), indent=2)
            else:
                start = net.index(args["start"]) if args.get("start") else 0
                result = json.dumps(prim_constrained(net, constraints, start).to_dict(net), indent=2)

        elif name == "check_tree":
            net = state.network(args)
            constraints = _constraints(net, args.get("constraints"))
            tree = SpanningTree.from_labels(net, (tuple(pair) for pair in args["edges"]))
            report = check_constraints(tree, net, constraints)
            verification = verify_assignment(
                build_model(net, constraints), assignment_from_tree(tree, net, constraints)
            )
            result = json.dumps({
                "satisfied": report.satisfied,
                "total_cost": tree_cost(tree, net),
                "constraints": report.to_dict(net),
                "formulation_check": verification.to_dict(),
            }, indent=2)

        elif name == "count_model":
            net = state.network(args)
            result = count_report(net, _constraints(net, args.get("constraints"))).to_json()

        elif name == "export_lp":
            net = state.network(args)
            result = export_lp(build_model(net, _constraints(net, args.get("constraints"))))

        elif name == "great_circle":
            p = GeoPoint(float(args["lat1"]), float(args["lon1"]))
            q = GeoPoint(float(args["lat2"]), float(args["lon2"]))
            result = f"{great_circle_km(p, q, state.earth_radius_km):.3f} km"

        else:
            result = f"[ERR] unknown tool: {name}"

    except Exception as e:
        logger.warning("[ERR] %s failed: %s", name, e)
        result = f"[ERR] {e}"

    return [types.TextContent(type="text", text=result)]


# ==================== リソース ====================

@server.list_resources()
async def handle_list_resources() -> list[types.Resource]:
    """利用可能なリソース"""
    return [
        types.Resource(
            uri=CASE_STUDY_URI,
            name="Mediterranean case study",
            description="地中海6都市のケーブル長ネットワーク（CSV）",
            mimeType="text/csv",
        )
    ]


@server.read_resource()
async def handle_read_resource(uri) -> str:
    """リソース読み取り"""
    if str(uri) == CASE_STUDY_URI:
        return state.case_study.to_csv()
    raise ValueError(f"Unknown resource: {uri}")


# ==================== メイン ====================

async def serve():
    """MCPサーバーを起動"""
    logger.info("[START] cable planner MCP server (pid %d)", os.getpid())
    async with mcp.server.stdio.stdio_server() as (read_stream, write_stream):
        await server.run(
            read_stream,
            write_stream,
            InitializationOptions(
                server_name="cable-planner",
                server_version="0.1.0",
                capabilities=server.get_capabilities(
                    notification_options=NotificationOptions(),
                    experimental_capabilities={},
                ),
            ),
        )


def main():
    setup_logging(os.environ.get("CABLE_PLANNER_VERBOSE") == "1")
    asyncio.run(serve())


if __name__ == "__main__":
    main()
