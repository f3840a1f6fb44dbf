"""SQLite registry of training runs and benchmark sweeps."""

from __future__ import annotations

import json
import math
import os
import sqlite3
import uuid
from collections.abc import Iterable
from pathlib import Path
from typing import Any

from .errors import RunNotFoundError
from .trainer import EpochRecord


def data_dir() -> Path:
    return Path(os.environ.get("NNXP_DATA_DIR") or Path(__file__).parent / "data")


def runs_db_path() -> Path:
    return data_dir() / "nnxp_runs.sqlite"


def get_connection() -> sqlite3.Connection:
    path = runs_db_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    connection = sqlite3.connect(path)
    connection.execute("PRAGMA foreign_keys = ON")
    return connection


def init_run_db() -> None:
    with get_connection() as connection:
        cursor = connection.cursor()
        cursor.execute(
            """
            CREATE TABLE IF NOT EXISTS runs (
                id TEXT PRIMARY KEY,
                kind TEXT NOT NULL CHECK(kind IN ('train','sweep')),
                name TEXT NOT NULL DEFAULT '',
                config_json TEXT NOT NULL DEFAULT '{}',
                final_test_accuracy REAL,
                model_path TEXT,
                created_at TEXT NOT NULL DEFAULT CURRENT_TIMESTAMP
            )
            """
        )
        cursor.execute(
            """
            CREATE TABLE IF NOT EXISTS epoch_records (
                run_id TEXT NOT NULL,
                workers INTEGER NOT NULL,
                rep INTEGER NOT NULL,
                epoch INTEGER NOT NULL,
                duration_seconds REAL NOT NULL,
                train_accuracy REAL NOT NULL,
                test_accuracy REAL NOT NULL,
                train_loss REAL,
                PRIMARY KEY(run_id, workers, rep, epoch),
                FOREIGN KEY(run_id) REFERENCES runs(id) ON DELETE CASCADE
            )
            """
        )
        cursor.execute("CREATE INDEX IF NOT EXISTS idx_runs_kind ON runs(kind, created_at)")
        connection.commit()


def _row_dicts(cursor) -> list[dict[str, Any]]:
    cols = [col[0] for col in cursor.description]
    rows = []
    for row in cursor.fetchall():
        data = dict(zip(cols, row))
        if isinstance(data.get("config_json"), str):
            try:
                data["config"] = json.loads(data["config_json"])
            except json.JSONDecodeError:
                data["config"] = {}
            del data["config_json"]
        rows.append(data)
    return rows


def record_run(
    kind: str,
    config: dict[str, Any],
    records: Iterable[EpochRecord],
    name: str = "",
    model_path: str | None = None,
) -> dict[str, Any]:
    records = list(records)
    run_id = str(uuid.uuid4())
    final = max(records, key=lambda r: (r.rep, r.epoch), default=None)
    with get_connection() as connection:
        cursor = connection.cursor()
        cursor.execute(
            """
            INSERT INTO runs(id, kind, name, config_json, final_test_accuracy, model_path)
            VALUES (?, ?, ?, ?, ?, ?)
            """,
            (
                run_id,
                kind,
                name,
                json.dumps(config, ensure_ascii=False),
                final.test_accuracy if final else None,
                model_path,
            ),
        )
        cursor.executemany(
            """
            INSERT INTO epoch_records(
                run_id, workers, rep, epoch, duration_seconds, train_accuracy, test_accuracy, train_loss
            )
            VALUES (?, ?, ?, ?, ?, ?, ?, ?)
            """,
            [
                (
                    run_id,
                    r.worker_count,
                    r.rep,
                    r.epoch,
                    r.duration_seconds,
                    r.train_accuracy,
                    r.test_accuracy,
                    None if math.isnan(r.train_loss) else r.train_loss,
                )
                for r in records
            ],
        )
        connection.commit()
    return get_run(run_id, include_records=False)


def list_runs(limit: int = 100, kind: str | None = None) -> list[dict[str, Any]]:
    limit = max(1, min(int(limit), 500))
    with get_connection() as connection:
        cursor = connection.cursor()
        sql = "SELECT * FROM runs"
        params: list[Any] = []
        if kind:
            sql += " WHERE kind = ?"
            params.append(kind)
        sql += " ORDER BY created_at DESC, rowid DESC LIMIT ?"
        params.append(limit)
        cursor.execute(sql, params)
        return _row_dicts(cursor)


def get_run(run_id: str, include_records: bool = True) -> dict[str, Any]:
    with get_connection() as connection:
        cursor = connection.cursor()
        cursor.execute("SELECT * FROM runs WHERE id = ?", (run_id,))
        rows = _row_dicts(cursor)
        if not rows:
            raise RunNotFoundError(f"Run '{run_id}' not found")
        run = rows[0]
        if include_records:
            cursor.execute(
                "SELECT workers, rep, epoch, duration_seconds, train_accuracy, test_accuracy, train_loss "
                "FROM epoch_records WHERE run_id = ? ORDER BY workers, rep, epoch",
                (run_id,),
            )
            run["records"] = _row_dicts(cursor)
        return run


def delete_run(run_id: str) -> int:
    with get_connection() as connection:
        cursor = connection.cursor()
        cursor.execute("DELETE FROM runs WHERE id = ?", (run_id,))
        connection.commit()
        return int(cursor.rowcount)
