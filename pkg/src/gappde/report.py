"""Deterministic JSON/CSV serialization of run results.

Floats are written with 17 significant digits, NaN and infinities as null,
and mapping keys in insertion order, so identical runs give identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, is_dataclass
from typing import Any, Iterable

import numpy as np

from . import __version__
from .equations import Residual, ResidualReport

RESULT_FIELDS = ("equation", "config", "residual", "normalization", "skipped", "reason")


def _float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    return s


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if is_dataclass(obj):
        obj = asdict(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def result_row(r: Residual) -> dict:
    return {
        "equation": r.equation,
        "config": r.config,
        "residual": None if r.skipped else r.residual,
        "normalization": None if r.skipped else r.normalization,
        "skipped": r.skipped,
        "reason": r.reason,
    }


def document(results: Iterable[dict], settings: dict) -> dict:
    return {"meta": {"version": __version__, "settings": settings}, "results": list(results)}


def residual_document(report: ResidualReport, settings: dict) -> dict:
    return document((result_row(r) for r in report.rows), settings)


def to_csv(doc: dict) -> str:
    """Flatten the ``results`` of a document to CSV with a fixed header."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    rows = doc.get("results", [])
    extra = []
    for row in rows:
        for k in row:
            if k not in RESULT_FIELDS and k not in extra:
                extra.append(k)
    header = [f for f in RESULT_FIELDS if any(f in r for r in rows)] + extra
    w.writerow(header)
    for row in rows:
        out = []
        for k in header:
            v = row.get(k)
            if v is None:
                out.append("")
            elif isinstance(v, float):
                out.append(_float(v) if math.isfinite(v) else "")
            else:
                out.append(str(v))
        w.writerow(out)
    return buf.getvalue()


def merge(docs: list[dict]) -> dict:
    """Concatenate the results of several documents; settings kept per source."""
    results, sources = [], []
    for d in docs:
        results.extend(d.get("results", []))
        sources.append(d.get("meta", {}).get("settings", {}))
    return document(results, {"sources": sources})


def loads(text: str) -> dict:
    return json.loads(text)
