"""JSON/CSV run reports.

JSON is canonical: ``{config, trace, result, metrics?, guarantees?}`` with
floats written in Python's shortest round-trip form.  CSV is the trace as a
flat table.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from ..hierarchical import HierSolveResult
from ..solver import SolveResult

TRACE_FIELDS = ("lambda", "objective", "feasible")


def _plain(obj):
    """Convert numpy/dataclass values to JSON-ready builtins."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    if is_dataclass(obj):
        return _plain(asdict(obj))
    return obj


def trace_rows(result) -> list:
    if isinstance(result, HierSolveResult):
        return [{"lambda": l1, "lambda2": l2, "objective": obj, "feasible": math.isfinite(obj)}
                for l1, l2, obj in result.trace]
    if isinstance(result, SolveResult):
        return [{"lambda": t.lam, "objective": t.objective, "feasible": t.feasible} for t in result.trace]
    return []


def result_dict(result) -> dict:
    if result is None:
        return {}
    if isinstance(result, HierSolveResult):
        return {"theta": result.theta_star, "lambda1": result.lambda1_star,
                "lambda2": result.lambda2_star, "feasible": result.feasible}
    if isinstance(result, SolveResult):
        return {"theta": result.theta_star, "lambda": result.lambda_star, "feasible": result.feasible}
    return dict(result)


def build_report(result=None, metrics=None, config=None, guarantees=None, extra=None) -> dict:
    rep = {"config": config or {}, "trace": trace_rows(result), "result": result_dict(result)}
    if metrics is not None:
        rep["metrics"] = metrics
    if guarantees is not None:
        rep["guarantees"] = guarantees
    if extra:
        rep.update(extra)
    return _plain(rep)


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"


def report_csv(report: dict, rows=None) -> str:
    """Header plus one line per trace entry, or per ``rows`` when given."""
    if rows is None:
        rows = report.get("trace", [])
        fields = list(TRACE_FIELDS)
        if any("lambda2" in r for r in rows):
            fields.insert(1, "lambda2")
        if any("tau" in r for r in rows):
            fields.insert(0, "tau")
    else:
        rows = _plain(rows)
        fields = list(rows[0]) if rows else []
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def emit_report(result=None, metrics=None, fmt: str = "json", path=None, config=None, guarantees=None,
                extra=None, rows=None) -> str:
    """Serialize a run and write it to ``path`` (or just return it when path is None).

    ``rows`` replaces the trace as the CSV table for runs whose natural flat
    view is something else (a tau sweep, a list of bounds).
    """
    report = build_report(result, metrics, config, guarantees, extra)
    if fmt == "json":
        text = dumps_report(report)
    elif fmt == "csv":
        text = report_csv(report, rows)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path is not None:
        try:
            Path(path).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write report to {path}: {exc.strerror}") from exc
    return text
