"""
Run artifacts on disk. Every run writes under ``<out>/``:
metrics/{scenario}_{matcher}.csv (one row per hour and seed),
ledgers/{scenario}_{matcher}_seed{seed}.ledger, experiments/{name}.csv
"""

import csv
import threading
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd
import structlog

from pyhedonic.core.context import METRIC_COLUMNS
from pyhedonic.core.engine import SessionResult
from pyhedonic.errors import StorageFailure

logger = structlog.get_logger(__name__)

METRICS_FIELDS = ["scenario", "matcher", "seed"] + METRIC_COLUMNS


class RunStorage:
    """Writes metrics, ledgers and experiment tables for simulation runs"""

    def __init__(self, out_dir: Optional[Union[str, Path]] = None):
        base = Path(out_dir) if out_dir else Path("data/runs")
        self.base_dir = base
        self.metrics_dir = base / "metrics"
        self.ledger_dir = base / "ledgers"
        self.experiment_dir = base / "experiments"
        try:
            for d in (self.metrics_dir, self.ledger_dir, self.experiment_dir):
                d.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise StorageFailure(f"cannot create output directory {base}: {e}") from e

        self._lock = threading.RLock()

        self.rows_stored = 0
        self.tables_stored = 0

    def metrics_path(self, scenario: str, matcher: str) -> Path:
        return self.metrics_dir / f"{scenario}_{matcher}.csv"

    def ledger_path(self, scenario: str, matcher: str, seed: int) -> Path:
        return self.ledger_dir / f"{scenario}_{matcher}_seed{seed}.ledger"

    def experiment_path(self, name: str) -> Path:
        return self.experiment_dir / f"{name}.csv"

    def _write_rows(self, file_path: Path, fieldnames: List[str], rows: List[Dict[str, Any]]):
        file_exists = file_path.exists() and file_path.stat().st_size > 0
        with file_path.open("a", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=fieldnames)
            if not file_exists:
                writer.writeheader()
            writer.writerows(rows)

    def store_metrics(self, result: SessionResult, seed: int) -> Path:
        """Append one row per hour of a finished session"""
        path = self.metrics_path(result.scenario.name, result.matcher)
        rows = [
            {"scenario": result.scenario.name, "matcher": result.matcher, "seed": seed, **h.metrics.to_row()}
            for h in result.hours
        ]
        try:
            with self._lock:
                self._write_rows(path, METRICS_FIELDS, rows)
                self.rows_stored += len(rows)
        except OSError as e:
            raise StorageFailure(f"cannot write metrics {path}: {e}") from e
        logger.debug("metrics_stored", path=str(path), rows=len(rows))
        return path

    def store_table(self, name: str, table: pd.DataFrame) -> Path:
        path = self.experiment_path(name)
        try:
            with self._lock:
                table.to_csv(path, index=False)
                self.tables_stored += 1
        except OSError as e:
            raise StorageFailure(f"cannot write table {path}: {e}") from e
        return path

    def get_storage_stats(self) -> Dict[str, int]:
        return {"rows_stored": self.rows_stored, "tables_stored": self.tables_stored}

    def close(self):
        print(f"💾 Storage closed. Final stats: {self.get_storage_stats()}")
