"""Deterministic report serialization (JSON and CSV) and console summaries."""

from __future__ import annotations

import csv
import io
import json
import math
from fractions import Fraction
from typing import Iterable, List

import numpy as np

from . import __version__
from .config import SCHEMA_VERSION
from .tasks import Check, TaskResult


def _plain(obj):
    """Recursively convert to JSON-safe builtins; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def run_report(config_raw: dict, results: List[TaskResult], wall_time: float = None) -> dict:
    checks = [c for r in results for c in r.checks]
    report = {
        "schema_version": SCHEMA_VERSION,
        "toolkit_version": __version__,
        "config": config_raw,
        "tasks": [r.to_dict() for r in results],
        "summary": {
            "checks": len(checks),
            "failed": sum(c.passed is False for c in checks),
            "report_only": sum(c.passed is None for c in checks),
        },
        "passed": all(r.passed for r in results),
    }
    if wall_time is not None:
        report["wall_time_s"] = wall_time
    return report


CSV_HEADER = ("task", "kind", "name", "value", "bound", "relation", "pass")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(_plain(v), sort_keys=True)
    return str(v)


def csv_rows(results: Iterable[TaskResult]):
    for r in results:
        for c in r.checks:
            yield (r.task, "check", c.name, c.value, c.bound, c.relation, c.passed)
        for lv in r.data.get("levels", []):
            yield (r.task, "level", f"n={lv['n']}", lv["energy"], None, None, None)


def to_csv(results: Iterable[TaskResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in csv_rows(results):
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _status(c: Check) -> str:
    return {True: "PASS", False: "FAIL", None: "INFO"}[c.passed]


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, dict):
        return ", ".join(f"{k}={_fmt(x)}" for k, x in v.items())
    return "" if v is None else str(v)


def summary_lines(results: Iterable[TaskResult]) -> List[str]:
    lines = []
    for r in results:
        lines.append(f"[{r.task}]")
        for c in r.checks:
            bound = "" if c.relation == "report" else f" {c.relation} {_fmt(c.bound)}"
            lines.append(f"  {_status(c)}  {c.name}: {_fmt(c.value)}{bound}")
        for lv in r.data.get("levels", []):
            lines.append(f"  n={lv['n']:<3d} E = {lv['energy']:.12g}")
    return lines
