"""Run records: ``record.json`` plus the CSV files it lists."""

from __future__ import annotations

import csv
import json
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy

from .. import __version__
from ..propagator import Trace, write_trace_csv
from .config import ExperimentConfig


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def environment() -> dict[str, str]:
    return {
        "package": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
    }


class RecordWriter:
    """Single owner of an output directory; every written file enters the manifest."""

    def __init__(self, out_dir: str | Path, command: str, cfg: ExperimentConfig | None, seed: int | None = None):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []
        self.record: dict[str, Any] = {
            "command": command,
            "started": datetime.now(timezone.utc).isoformat(),
            "environment": environment(),
            "seed": seed,
            "results": {},
        }
        if cfg is not None:
            self.record["config_name"] = cfg.name
            self.record["config_digest"] = cfg.digest()
            self.record["config"] = cfg.raw

    def result(self, key: str, value: Any) -> None:
        self.record["results"][key] = _jsonable(value)

    def table(self, name: str, columns: Sequence[str], rows: Sequence[Sequence[float]]) -> Path:
        path = self.out / name
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(columns))
            for r in rows:
                w.writerow([f"{v:.15g}" if isinstance(v, float) else v for v in r])
        self.files.append(name)
        return path

    def trace(self, name: str, trace: Trace) -> Path:
        path = write_trace_csv(self.out / name, trace, levels=True)
        self.files.append(name)
        return path

    def add(self, name: str) -> Path:
        """Register a file written by someone else."""
        self.files.append(name)
        return self.out / name

    def close(self, status: str = "ok") -> Path:
        self.record["finished"] = datetime.now(timezone.utc).isoformat()
        self.record["status"] = status
        self.record["manifest"] = sorted(set(self.files)) + ["record.json"]
        path = self.out / "record.json"
        path.write_text(json.dumps(_jsonable(self.record), indent=2, allow_nan=True))
        return path
