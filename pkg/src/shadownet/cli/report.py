"""Run reports: report.json plus one CSV per table."""
from __future__ import annotations

import csv
import json
import math
import os
import subprocess
from dataclasses import dataclass, field

import numpy as np

from .. import __version__


def artifact_version() -> str:
    """Package version, with the short git hash when run from a checkout."""
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"], cwd=here, capture_output=True,
                             text=True, timeout=5, check=True).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        rev = ""
    return f"{__version__}+g{rev}" if rev else __version__


@dataclass
class Report:
    command: str
    config: dict
    version: str
    tables: dict = field(default_factory=dict)  # name -> list of row dicts
    aggregates: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)  # acceptance criterion number -> passed
    duration_s: float = 0.0

    def to_dict(self) -> dict:
        return jsonable({"command": self.command, "config": self.config, "version": self.version,
                         "tables": self.tables, "aggregates": self.aggregates,
                         "checks": {str(k): v for k, v in sorted(self.checks.items())},
                         "duration_s": self.duration_s})


def jsonable(obj):
    """Plain JSON types; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_report(report: Report, output_dir) -> list:
    """Write report.json and <table>.csv files; returns the written paths."""
    try:
        os.makedirs(output_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {output_dir}: {exc}") from exc
    paths = []
    path = os.path.join(output_dir, "report.json")
    with open(path, "w") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")
    paths.append(path)
    for name, rows in report.tables.items():
        if not rows:
            continue
        path = os.path.join(output_dir, f"{name}.csv")
        cols = list(rows[0].keys())
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(cols)
            for row in rows:
                w.writerow([jsonable(row[c]) for c in cols])
        paths.append(path)
    return paths
