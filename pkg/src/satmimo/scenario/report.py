"""Sweep tables and their CSV / JSON serialization."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

__all__ = ["SweepTable", "SCHEMA_VERSION", "emit_report", "format_report", "read_report", "load_schema"]

SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class SweepTable:
    columns: tuple
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def where(self, **match) -> list:
        idx = {k: self.columns.index(k) for k in match}
        return [r for r in self.rows if all(r[i] == match[k] for k, i in idx.items())]

    def as_dicts(self) -> list:
        return [dict(zip(self.columns, r)) for r in self.rows]


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def _json_value(v):
    if isinstance(v, float):
        return float(f"{v:.9g}")
    if hasattr(v, "item"):
        return _json_value(v.item())
    return v


def format_report(table: SweepTable, fmt: str = "csv") -> str:
    """Render a table; floats keep 9 significant digits, column order is preserved."""
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(f"# schema_version: {SCHEMA_VERSION}\n")
        for k in sorted(table.metadata):
            buf.write(f"# {k}: {table.metadata[k]}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table.columns)
        for r in table.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()
    if fmt == "json":
        doc = {
            "schema_version": SCHEMA_VERSION,
            "metadata": {k: _json_value(v) for k, v in table.metadata.items()},
            "columns": list(table.columns),
            "rows": [[_json_value(v) for v in r] for r in table.rows],
        }
        return json.dumps(doc, indent=1) + "\n"
    raise ValueError(f"unknown format {fmt!r}; expected 'csv' or 'json'")


def emit_report(table: SweepTable, fmt: str, path) -> Path:
    p = Path(path)
    p.write_text(format_report(table, fmt))
    return p


def _parse_cell(s: str):
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            pass
    return s


def read_report(path) -> SweepTable:
    """Parse a file written by :func:`emit_report` (format from the suffix or content)."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return SweepTable(tuple(doc["columns"]), [tuple(r) for r in doc["rows"]], doc["metadata"])
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition(":")
            if k.strip() != "schema_version":
                meta[k.strip()] = v.strip()
        else:
            body.append(line)
    reader = csv.reader(body)
    header = next(reader, None)
    if header is None:
        return SweepTable((), [], meta)
    return SweepTable(tuple(header), [tuple(_parse_cell(c) for c in r) for r in reader], meta)


def load_schema() -> dict:
    f = resources.files("satmimo.scenario") / "schemas" / "sweep_table.schema.json"
    return json.loads(f.read_text())
