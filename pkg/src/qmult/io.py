"""Result tables: CSV and JSON writers, readers, and run metadata sidecars."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__


def format_real(x: float) -> str:
    """17 significant digits, enough for an exact double round trip."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        x = 0.0  # drop the sign of negative zero
    return format(x, ".17g")


def format_cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_real(v)
    if isinstance(v, (list, tuple)):
        return ";".join(format_cell(x) for x in v)
    return str(v)


@dataclass
class Table:
    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} cells, table has {len(self.columns)} columns")
        self.rows.append(list(values))

    def cells(self) -> list[list[str]]:
        return [[format_cell(v) for v in row] for row in self.rows]


def to_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(table.columns)
    w.writerows(table.cells())
    return buf.getvalue()


def to_json(table: Table, command: str) -> str:
    doc = {"command": command, "columns": table.columns, "rows": table.cells()}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def metadata(config: dict, runtime_ms: float) -> dict:
    return {
        "config": config,
        "config_hash": config_hash(config),
        "versions": {
            "qmult": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "runtime_ms": runtime_ms,
    }


def write_results(table: Table, command: str, fmt: str, path: str | os.PathLike | None,
                  meta: dict | None = None, stream=None) -> None:
    """Write the table to ``path`` (or ``stream``), plus ``<path>.meta.json`` when a path is given."""
    text = to_csv(table) if fmt == "csv" else to_json(table, command)
    if path is None:
        (stream or __import__("sys").stdout).write(text)
        return
    p = Path(path)
    try:
        if p.parent and not p.parent.exists():
            p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        if meta is not None:
            with open(str(p) + ".meta.json", "w", encoding="utf-8") as fh:
                json.dump(meta, fh, indent=1, sort_keys=True, default=str)
                fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {p}: {exc.strerror or exc}") from exc


def read_csv(path) -> Table:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    return Table(rows[0], rows[1:])


def read_json(path) -> Table:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return Table(list(doc["columns"]), [list(r) for r in doc["rows"]])


def read_results(path) -> Table:
    """Read a CSV or JSON result file back as strings."""
    p = str(path)
    return read_json(p) if p.endswith(".json") else read_csv(p)


def parse_real(cell: str) -> float:
    return float(cell)
