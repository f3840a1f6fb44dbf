"""Tool: nnxp_training – train, evaluate and inspect MNIST connectomes.

``train`` runs the exemplar-parallel trainer on the MNIST files in
``data_dir`` and records the run (config plus per-epoch records) in the run
registry; the new run becomes the server's "last run".
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from mcp import types

from ...connectome import init_connectome
from ...dataio import CLASSES, load_mnist, load_split
from ...errors import NnxpError
from ...persistence import load_connectome, save_connectome
from ...run_db import record_run
from ...server import mcp, record_dict, set_last_run, trainer_config_from_payload
from ...trainer import evaluate, train


def _text(data: Any) -> list[types.TextContent]:
    return [types.TextContent(type="text", text=json.dumps(data, ensure_ascii=False))]


def _error(message: str) -> list[types.TextContent]:
    return [types.TextContent(type="text", text=f"Error: {message}")]


def _limited(dataset, limit: Any):
    return dataset.head(int(limit)) if limit else dataset


@mcp.tool()
def nnxp_training(action: str, payload_json: str = "{}") -> list[types.TextContent]:
    """Actions:
    - train: {data_dir, format?, epochs?, workers?, worker_batch?, eta?, lambda?, elu_alpha?, hidden?,
              seed?, merge?, deterministic?, executor?, softmax_gradient?, update_rule?, limit?, test_limit?,
              load?, save?, name?}
    - evaluate: {model, data_dir, format?, split?, limit?}
    - model_info: {model}
    """
    action = (action or "").strip().lower()
    try:
        payload: dict[str, Any] = json.loads(payload_json) if payload_json else {}
    except json.JSONDecodeError as exc:
        return _error(f"payload_json invalid – {exc}")

    try:
        if action == "train":
            if not payload.get("data_dir"):
                return _error("missing required field 'data_dir'")
            config = trainer_config_from_payload(payload)
            fmt = str(payload.get("format", "idx"))
            train_set, test_set = load_mnist(payload["data_dir"], fmt)
            train_set = _limited(train_set, payload.get("limit"))
            test_set = _limited(test_set, payload.get("test_limit"))
            hidden = int(payload.get("hidden", 100))
            if payload.get("load"):
                master = load_connectome(payload["load"])
            else:
                master = init_connectome((train_set.input_size, hidden, CLASSES), config.elu_alpha, config.seed)

            report = train(master, train_set, test_set, config)
            model_path = None
            if payload.get("save"):
                model_path = str(save_connectome(report.connectome, payload["save"]))
            run_config = {
                **config.as_dict(),
                "layer_sizes": list(report.connectome.layer_sizes),
                "data_dir": str(payload["data_dir"]),
            }
            run = record_run(
                "train",
                run_config,
                report.records,
                name=str(payload.get("name", "")),
                model_path=model_path,
            )
            set_last_run(run["id"])
            return _text(
                {
                    "run_id": run["id"],
                    "final_test_accuracy": run["final_test_accuracy"],
                    "model_path": model_path,
                    "records": [record_dict(r) for r in report.records],
                }
            )

        if action == "evaluate":
            for key in ("model", "data_dir"):
                if not payload.get(key):
                    return _error(f"missing required field '{key}'")
            split = str(payload.get("split", "test"))
            connectome = load_connectome(payload["model"])
            dataset = load_split(payload["data_dir"], split, str(payload.get("format", "idx")))
            dataset = _limited(dataset, payload.get("limit"))
            return _text({"split": split, "examples": len(dataset), "accuracy": evaluate(connectome, dataset)})

        if action == "model_info":
            if not payload.get("model"):
                return _error("missing required field 'model'")
            path = Path(payload["model"])
            connectome = load_connectome(path)
            return _text(
                {
                    "path": str(path),
                    "layer_sizes": list(connectome.layer_sizes),
                    "elu_alpha": connectome.elu_alpha,
                    "parameter_count": connectome.parameter_count,
                    "file_bytes": path.stat().st_size,
                }
            )

        return _error(f"unknown action '{action}'. Allowed: train, evaluate, model_info")
    except NnxpError as exc:
        return _error(str(exc))
    except Exception as exc:
        return _error(str(exc))
