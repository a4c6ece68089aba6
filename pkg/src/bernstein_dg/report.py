"""Tabular experiment results with a lossless CSV form.

The CSV layout is a block of ``# key=value`` metadata lines, the header
row, then one row per parameter combination.  Floats are written with 17
significant digits so they parse back bit-for-bit.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["ExperimentReport", "format_value", "parse_value"]


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        s = f"{v:.17g}"
        # keep integral floats distinguishable from ints
        return s if any(ch in s for ch in ".eniI") else s + ".0"
    if hasattr(v, "dtype"):  # numpy scalar
        return format_value(v.item())
    return str(v)


def parse_value(s: str):
    """Inverse of :func:`format_value`: int, then float, then bool, else str."""
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        pass
    if s in ("True", "False"):
        return s == "True"
    return s


@dataclass
class ExperimentReport:
    name: str
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, **row) -> None:
        unknown = set(row) - set(self.columns)
        if unknown:
            raise KeyError(f"unknown column(s) {sorted(unknown)}")
        self.rows.append({c: row.get(c) for c in self.columns})

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# experiment={self.name}\n")
        for k, v in self.metadata.items():
            buf.write(f"# {k}={format_value(v)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([format_value(r[c]) for c in self.columns])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ExperimentReport":
        lines = text.splitlines()
        meta, k = {}, 0
        while k < len(lines) and lines[k].startswith("# "):
            key, _, val = lines[k][2:].partition("=")
            meta[key] = parse_value(val)
            k += 1
        name = meta.pop("experiment", "")
        reader = csv.reader(lines[k:])
        columns = next(reader)
        rows = [dict(zip(columns, map(parse_value, r))) for r in reader if r]
        return cls(str(name), columns, rows, meta)

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def load(cls, path) -> "ExperimentReport":
        return cls.from_csv(Path(path).read_text())
