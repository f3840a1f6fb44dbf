"""Tool: nnxp_bench – worker-count sweeps with per-worker medians and speedups."""

from __future__ import annotations

import json
from typing import Any

from mcp import types

from ...bench import DEFAULT_HIDDEN, DEFAULT_REPETITIONS, emit_csv, format_summary, run_sweep, speedup
from ...dataio import load_mnist
from ...errors import NnxpError
from ...run_db import record_run
from ...server import mcp, set_last_run, trainer_config_from_payload


def _worker_list(value: Any) -> list[int]:
    if isinstance(value, str):
        return [int(part) for part in value.split(",") if part.strip()]
    if isinstance(value, int):
        return [value]
    return [int(v) for v in value]


@mcp.tool()
def nnxp_bench(action: str, payload_json: str = "{}") -> list[types.TextContent]:
    """Actions:
    - sweep: {data_dir, workers (list or "1,2,4"), format?, repetitions?, epochs?, hidden?, limit?,
              test_limit?, executor?, csv?, name?}

    The baseline worker count 1 must be among ``workers``.
    """
    action = (action or "").strip().lower()
    try:
        payload: dict[str, Any] = json.loads(payload_json) if payload_json else {}
    except json.JSONDecodeError as exc:
        return [types.TextContent(type="text", text=f"Error: payload_json invalid – {exc}")]

    try:
        if action == "sweep":
            for key in ("data_dir", "workers"):
                if not payload.get(key):
                    return [types.TextContent(type="text", text=f"Error: missing required field '{key}'")]
            counts = _worker_list(payload["workers"])
            config = trainer_config_from_payload(payload, workers=1)
            train_set, test_set = load_mnist(payload["data_dir"], str(payload.get("format", "idx")))
            if payload.get("limit"):
                train_set = train_set.head(int(payload["limit"]))
            if payload.get("test_limit"):
                test_set = test_set.head(int(payload["test_limit"]))
            hidden = int(payload.get("hidden", DEFAULT_HIDDEN))

            result = run_sweep(
                train_set,
                test_set,
                config,
                counts,
                repetitions=int(payload.get("repetitions", DEFAULT_REPETITIONS)),
                hidden=hidden,
            )
            csv_path = str(emit_csv(result, payload["csv"])) if payload.get("csv") else None
            run = record_run(
                "sweep",
                {**config.as_dict(), "worker_counts": counts, "hidden": hidden},
                result.records,
                name=str(payload.get("name", "")),
            )
            set_last_run(run["id"])
            rows = [
                {"workers": w, "median_seconds": result.median_seconds(w), "speedup": speedup(result, w)}
                for w in result.worker_counts
            ]
            body = {"run_id": run["id"], "workers": rows, "csv": csv_path, "summary": format_summary(result)}
            return [types.TextContent(type="text", text=json.dumps(body, ensure_ascii=False))]

        return [types.TextContent(type="text", text=f"Error: unknown action '{action}'. Allowed: sweep")]
    except NnxpError as exc:
        return [types.TextContent(type="text", text=f"Error: {exc}")]
    except Exception as exc:
        return [types.TextContent(type="text", text=f"Error: {exc}")]
