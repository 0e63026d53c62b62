"""Deterministic JSON/CSV report writing.

A result is a dict with a "summary" mapping of scalars and an optional
"tables" mapping name -> {"columns": [...], "rows": [[...], ...]}.  Floats are
always written with 17 significant digits and keys keep insertion order, so
identical results give identical bytes.
"""

import csv
import io
import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from ._numerics import fmt

REPORT_SCHEMA = {
    "type": "object",
    "required": ["op", "status", "summary", "tables"],
    "properties": {
        "op": {"type": "string"},
        "status": {"enum": ["ok", "failed", "error"]},
        "summary": {"type": "object"},
        "failed_checks": {"type": "array", "items": {"type": "string"}},
        "tables": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["columns", "rows"],
                "properties": {
                    "columns": {"type": "array", "items": {"type": "string"}},
                    "rows": {"type": "array", "items": {"type": "array"}},
                },
            },
        },
    },
}


def _plain(x):
    """numpy scalars/arrays and tuples to JSON-ready Python values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    return x


def _float_token(x):
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return fmt(x)


def dumps(obj, indent=0):
    """JSON text with 17-significant-digit floats; non-finite floats become strings."""
    obj = _plain(obj)
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _float_token(obj)
    return json.dumps(obj)


def _cell(x):
    x = _plain(x)
    if isinstance(x, float):
        return fmt(x)
    if isinstance(x, list):
        return ";".join(_cell(v) for v in x)
    if x is None:
        return ""
    return str(x)


def table_csv(table):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table["columns"])
    for row in table["rows"]:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def report_document(op, status, summary, tables=None, failed_checks=()):
    doc = {
        "op": op,
        "status": status,
        "summary": _plain(summary),
        "failed_checks": list(failed_checks),
        "tables": _plain(tables or {}),
    }
    jsonschema.validate(doc, REPORT_SCHEMA)
    return doc


def emit_report(doc, out_dir, stem, formats=("json", "csv")):
    """Write stem.json and one stem_<table>.csv per table; return the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in formats:
        p = out / f"{stem}.json"
        p.write_text(dumps(doc) + "\n")
        written.append(p)
    if "csv" in formats:
        for name, table in doc["tables"].items():
            p = out / f"{stem}_{name}.csv"
            p.write_text(table_csv(table))
            written.append(p)
    return written
