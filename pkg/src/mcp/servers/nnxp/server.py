"""NNXP MCP Server – entry point.

Establishes the FastMCP instance, initializes the run registry and imports the
tool modules so that their @mcp.tool() decorators register with this server.
"""

from __future__ import annotations

import math
from dataclasses import asdict
from typing import Any

from mcp.server.fastmcp import FastMCP

from .run_db import init_run_db
from .trainer import EpochRecord, MergeMode, TrainerConfig

# ---------------------------------------------------------------------------
# conversational state: the most recently recorded run
# ---------------------------------------------------------------------------
_last_run_id: str | None = None


def set_last_run(run_id: str | None) -> None:
    global _last_run_id
    _last_run_id = run_id


def get_last_run() -> str | None:
    """Return the id of the last run recorded by a tool, or None."""
    return _last_run_id


# ---------------------------------------------------------------------------
# payload helpers shared by the tools
# ---------------------------------------------------------------------------
def _flag(value: Any) -> bool:
    if isinstance(value, str):
        return value.strip().lower() in ("true", "1", "yes")
    return bool(value)


def trainer_config_from_payload(payload: dict[str, Any], **overrides: Any) -> TrainerConfig:
    """Build a validated TrainerConfig from tool payload keys.

    Tools run the serial executor unless the payload names another; the
    merge arithmetic is identical either way.
    """
    fields: dict[str, Any] = {
        "eta": float(payload.get("eta", 0.8)),
        "lam": float(payload.get("lambda", payload.get("lam", 1e-7))),
        "elu_alpha": float(payload.get("elu_alpha", 0.5)),
        "worker_batch": int(payload.get("worker_batch", 100)),
        "workers": int(payload.get("workers", 1)),
        "epochs": int(payload.get("epochs", 1)),
        "seed": int(payload.get("seed", 1)),
        "merge_mode": MergeMode(str(payload.get("merge", "avg"))),
        "deterministic_order": _flag(payload.get("deterministic", True)),
        "executor": str(payload.get("executor", "serial")),
        "softmax_gradient": str(payload.get("softmax_gradient", "full")),
        "update_rule": str(payload.get("update_rule", "unscaled")),
    }
    fields.update(overrides)
    return TrainerConfig(**fields)


def record_dict(record: EpochRecord) -> dict[str, Any]:
    data = asdict(record)
    if math.isnan(data["train_loss"]):
        data["train_loss"] = None
    return data


# ---------------------------------------------------------------------------
# FastMCP instance
# ---------------------------------------------------------------------------
mcp = FastMCP("NNXP")

init_run_db()

# ---------------------------------------------------------------------------
# Import tool modules so their decorators register with `mcp`
# ---------------------------------------------------------------------------
from .tools.nnxp_bench import tool as _t1  # noqa: E402, F401
from .tools.nnxp_runs import tool as _t2  # noqa: E402, F401
from .tools.nnxp_training import tool as _t3  # noqa: E402, F401
