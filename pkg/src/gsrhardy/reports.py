"""JSON reports: assembly, schema validation, deterministic serialisation and CSV flattening."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import __version__

SCHEMA_VERSION = 1

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "tool", "tool_version", "command", "manifest", "results", "passed"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "tool": {"const": "gsrhardy"},
        "tool_version": {"type": "string"},
        "command": {"enum": ["identities", "verify-gsr", "hardy", "estimate", "sharpness"]},
        "manifest": {"type": "object", "required": ["command", "seed"]},
        "results": {"type": "object"},
        "passed": {"type": "boolean"},
        "wall_clock_seconds": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
}

RESULT_KEYS = {
    "identities": ["checks", "passed"],
    "verify-gsr": ["lhs", "pot_term", "rhs", "residual", "stderr", "pass"],
    "hardy": ["lhs", "weighted", "deficit", "stderr", "constant", "weight", "pass"],
    "estimate": ["kind", "d", "N", "p", "estimate", "stated_bound", "alpha_opt", "hardy_constant"],
    "sharpness": ["sweeps"],
}


def jsonable(obj: Any) -> Any:
    """Plain-JSON copy: numpy scalars/arrays unwrapped, non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def build_report(command: str, manifest: dict, results: dict, passed: bool,
                 wall_clock: float | None = None) -> dict:
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool": "gsrhardy",
        "tool_version": __version__,
        "command": command,
        "manifest": jsonable(manifest),
        "results": jsonable(results),
        "passed": bool(passed),
    }
    if wall_clock is not None:
        report["wall_clock_seconds"] = float(wall_clock)
    validate_report(report)
    return report


def validate_report(report: dict) -> None:
    jsonschema.validate(report, REPORT_SCHEMA)
    missing = [k for k in RESULT_KEYS[report["command"]] if k not in report["results"]]
    if missing:
        raise jsonschema.ValidationError(f"{report['command']} results lack {missing}")


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def load_report(path: str | Path) -> dict:
    report = json.loads(Path(path).read_text(encoding="utf-8"))
    validate_report(report)
    return report


# CSV -------------------------------------------------------------------------

def _flatten(obj: Any, prefix: str, out: dict) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(v, f"{prefix}.{k}" if prefix else str(k), out)
    elif isinstance(obj, list) and obj and not any(isinstance(v, (dict, list)) for v in obj):
        out[prefix] = ";".join("" if v is None else str(v) for v in obj)
    elif isinstance(obj, list):
        out[prefix] = json.dumps(obj, sort_keys=True)
    else:
        out[prefix] = obj


def report_rows(report: dict, source: str = "") -> list[dict]:
    """One row per entry of a tabular result (checks, sweeps), else one row per report."""
    base = {"source": source, "command": report["command"], "passed": report["passed"]}
    _flatten(report["manifest"], "manifest", base)
    results = report["results"]
    tables = [k for k, v in results.items() if isinstance(v, list) and v and all(isinstance(r, dict) for r in v)]
    scalars = {k: v for k, v in results.items() if k not in tables}
    _flatten(scalars, "", base)
    if not tables:
        return [base]
    rows = []
    for key in tables:
        for entry in results[key]:
            row = dict(base)
            row["table"] = key
            _flatten(entry, key, row)
            rows.append(row)
    return rows


def to_csv(reports: list[tuple[str, dict]]) -> str:
    rows = [row for source, rep in reports for row in report_rows(rep, source)]
    fields = sorted({k for r in rows for k in r})
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow(r)
    return buf.getvalue()
