"""Deterministic CSV / JSON report writer.

CSV reports start with one ``# `` comment line holding the metadata as
compact JSON, then the header row.  Floats use 17 significant digits,
fractions are written ``p/q``, count classes ``j1:j2:...``.  JSON reports are a
single object ``{"meta": ..., "rows": [...]}``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import sys
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, tuple):
        return ":".join(str(v) for v in value)
    return str(value)


def _json_value(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, tuple):
        return [_json_value(v) for v in value]
    if isinstance(value, list):
        return [_json_value(v) for v in value]
    if isinstance(value, Mapping):
        return {str(k): _json_value(v) for k, v in value.items()}
    return value


def _as_dict(row, schema: Sequence[str]) -> dict:
    if isinstance(row, Mapping):
        missing = [c for c in schema if c not in row]
        if missing:
            raise ValueError(f"row is missing column(s) {missing}")
        return {c: row[c] for c in schema}
    row = tuple(row)
    if len(row) != len(schema):
        raise ValueError(f"row has {len(row)} fields, schema has {len(schema)}")
    return dict(zip(schema, row))


def render_report(rows: Iterable, schema: Sequence[str], fmt: str = "csv", meta: Optional[dict] = None) -> str:
    rows = [_as_dict(r, schema) for r in rows]
    if fmt == "json":
        doc = {"meta": _json_value(meta or {}), "rows": [_json_value(r) for r in rows]}
        return json.dumps(doc, indent=2) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    buf = io.StringIO()
    if meta is not None:
        buf.write("# " + json.dumps(_json_value(meta), separators=(",", ":")) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(schema)
    for r in rows:
        writer.writerow([_csv_cell(r[c]) for c in schema])
    return buf.getvalue()


def emit_report(rows: Iterable, schema: Sequence[str], fmt: str = "csv", path=None, meta: Optional[dict] = None) -> str:
    """Render and write a report to ``path`` (stdout for ``None`` or ``"-"``)."""
    text = render_report(rows, schema, fmt, meta)
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
    return text
