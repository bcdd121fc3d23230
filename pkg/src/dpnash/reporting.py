"""Experiment reports: fixed-schema CSV tables plus a JSON summary.

Every CSV starts with a ``# dpnash/<kind>-<table>/<version>`` line, then a
header row. Floats are written with ``%.12g``; failed runs carry ``nan``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

SCHEMA_VERSION = 1


@dataclass
class Table:
    columns: list
    rows: list  # list of dicts keyed by column

    def to_csv(self, schema: str) -> str:
        buf = io.StringIO()
        buf.write(f"# {schema}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_value(row[c]) for c in self.columns])
        return buf.getvalue()


def format_value(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return "%.12g" % v
    if v is None:
        return ""
    return str(v)


def parse_csv(text: str) -> list:
    """Rows of a report CSV as dicts, numbers converted back to float/int."""
    body = "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))
    out = []
    for row in csv.DictReader(io.StringIO(body)):
        out.append({k: _parse_value(v) for k, v in row.items()})
    return out


def _parse_value(s: str):
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


@dataclass
class ExperimentReport:
    kind: str
    records: Table
    aggregates: Table
    extra: dict = field(default_factory=dict)  # name -> Table
    config: dict = field(default_factory=dict)
    version: str = ""
    backend: str = ""
    failed: int = 0
    warnings: list = field(default_factory=list)

    def schema(self, table: str) -> str:
        return f"dpnash/{self.kind}-{table}/{SCHEMA_VERSION}"

    def csv_texts(self) -> dict:
        texts = {
            "runs": self.records.to_csv(self.schema("runs")),
            "aggregate": self.aggregates.to_csv(self.schema("aggregate")),
        }
        for name, table in self.extra.items():
            texts[name] = table.to_csv(self.schema(name))
        return texts

    def summary(self) -> dict:
        return {
            "experiment": self.kind,
            "tool_version": self.version,
            "kernel": self.backend,
            "failed_runs": self.failed,
            "warnings": self.warnings,
            "aggregate": [_jsonable(r) for r in self.aggregates.rows],
            "config": self.config,
        }

    def write(self, outdir) -> dict:
        """Write ``<kind>_<table>.csv`` files and ``<kind>_summary.json``."""
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        for name, text in self.csv_texts().items():
            p = out / f"{self.kind}_{name}.csv"
            with open(p, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            paths[name] = p
        p = out / f"{self.kind}_summary.json"
        with open(p, "w", encoding="utf-8", newline="") as fh:
            json.dump(self.summary(), fh, indent=2, allow_nan=True)
            fh.write("\n")
        paths["summary"] = p
        return paths


def _jsonable(row: dict) -> dict:
    out = {}
    for k, v in row.items():
        if isinstance(v, float) and not math.isfinite(v):
            out[k] = None
        else:
            out[k] = v
    return out


def values_match(a, b, rtol=1e-9, atol=1e-12) -> bool:
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, str) or isinstance(b, str):
        return a == b
    a, b = float(a), float(b)
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    return abs(a - b) <= atol + rtol * max(abs(a), abs(b))
