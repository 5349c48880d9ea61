"""Rectangular result tables with CSV and JSON-lines serialization.

Floats are rounded to 9 significant digits when a table is built, so that
``parse(emit(table)) == table`` holds exactly for both formats.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

FORMATS = ("csv", "jsonl")
SIG_DIGITS = 9


def _round(x: float) -> float:
    if not math.isfinite(x):
        return x
    return float(f"{x:.{SIG_DIGITS}g}")


def normalize_cell(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, int):
        return v
    if isinstance(v, float):
        return _round(v)
    if hasattr(v, "item"):  # numpy scalars
        return normalize_cell(v.item())
    return str(v)


def format_cell(v) -> str:
    if isinstance(v, float):
        s = f"{v:.{SIG_DIGITS}g}"
        # keep integral floats distinguishable from int cells
        return s if any(c in s for c in ".ein") else s + ".0"
    return str(v)


def parse_cell(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _same(a, b) -> bool:
    if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
        return True
    return type(a) is type(b) and a == b


@dataclass
class OutputTable:
    columns: list[str]
    rows: list[list] = field(default_factory=list)

    def __post_init__(self):
        self.columns = list(self.columns)
        rows, self.rows = self.rows, []
        for r in rows:
            self.append(r)

    def append(self, row) -> None:
        if isinstance(row, dict):
            missing = [c for c in self.columns if c not in row]
            if missing:
                raise ValueError(f"row lacks columns {missing}")
            row = [row[c] for c in self.columns]
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} cells, table has {len(self.columns)} columns")
        self.rows.append([normalize_cell(v) for v in row])

    def __len__(self) -> int:
        return len(self.rows)

    def __eq__(self, other) -> bool:
        if not isinstance(other, OutputTable) or self.columns != other.columns or len(self) != len(other):
            return False
        return all(_same(a, b) for ra, rb in zip(self.rows, other.rows) for a, b in zip(ra, rb))

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]

    def emit(self, fmt: str = "csv") -> str:
        if fmt == "csv":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([format_cell(v) for v in r])
            return buf.getvalue()
        if fmt == "jsonl":
            # NaN and Infinity use Python's json spelling
            return "".join(json.dumps(d) + "\n" for d in self.records())
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")

    @classmethod
    def parse(cls, text: str, fmt: str = "csv") -> "OutputTable":
        if fmt == "csv":
            reader = csv.reader(io.StringIO(text))
            header = next(reader)
            return cls(header, [[parse_cell(c) for c in row] for row in reader])
        if fmt == "jsonl":
            records = [json.loads(line) for line in text.splitlines() if line.strip()]
            if not records:
                raise ValueError("no JSON-lines records to parse a header from")
            return cls(list(records[0]), [list(d.values()) for d in records])
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
