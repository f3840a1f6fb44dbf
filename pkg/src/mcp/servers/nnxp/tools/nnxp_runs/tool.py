"""Tool: nnxp_runs – browse and prune the run registry."""

from __future__ import annotations

import json
from typing import Any

from mcp import types

from ...errors import NnxpError
from ...run_db import delete_run, get_run, list_runs, runs_db_path
from ...server import get_last_run, mcp, set_last_run


@mcp.tool()
def nnxp_runs(action: str, payload_json: str = "{}") -> list[types.TextContent]:
    """Actions:
    - list: {limit?, kind?}   kind is "train" or "sweep"
    - get: {run_id?, include_records?}   defaults to the last recorded run
    - delete: {run_id}
    - db_info
    """
    action = (action or "").strip().lower()
    try:
        payload: dict[str, Any] = json.loads(payload_json) if payload_json else {}
    except json.JSONDecodeError as exc:
        return [types.TextContent(type="text", text=f"Error: payload_json invalid – {exc}")]

    try:
        if action == "list":
            kind = payload.get("kind")
            result = list_runs(limit=int(payload.get("limit", 100)), kind=str(kind) if kind else None)
            return [types.TextContent(type="text", text=json.dumps(result, ensure_ascii=False))]

        if action == "get":
            run_id = payload.get("run_id") or get_last_run()
            if not run_id:
                return [types.TextContent(type="text", text="Error: missing required field 'run_id'")]
            result = get_run(str(run_id), include_records=bool(payload.get("include_records", True)))
            return [types.TextContent(type="text", text=json.dumps(result, ensure_ascii=False))]

        if action == "delete":
            if not payload.get("run_id"):
                return [types.TextContent(type="text", text="Error: missing required field 'run_id'")]
            count = delete_run(str(payload["run_id"]))
            if count and payload["run_id"] == get_last_run():
                set_last_run(None)
            return [types.TextContent(type="text", text=json.dumps({"deleted": count}))]

        if action == "db_info":
            path = runs_db_path()
            return [types.TextContent(type="text", text=json.dumps({"path": str(path), "exists": path.exists()}))]

        allowed = "list, get, delete, db_info"
        return [types.TextContent(type="text", text=f"Error: unknown action '{action}'. Allowed: {allowed}")]
    except NnxpError as exc:
        return [types.TextContent(type="text", text=f"Error: {exc}")]
    except Exception as exc:
        return [types.TextContent(type="text", text=f"Error: {exc}")]
