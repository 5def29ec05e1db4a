"""Report container: named CSV tables, run metadata, figure specs."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence


@dataclass
class Table:
    header: List[str]
    rows: List[list] = field(default_factory=list)

    def add(self, *row) -> None:
        if len(row) != len(self.header):
            raise ValueError(f"row has {len(row)} fields, header has {len(self.header)}")
        self.rows.append(list(row))

    def column(self, name: str) -> list:
        i = self.header.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([_cell(x) for x in r])
        return buf.getvalue()


def _cell(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.6f}".rstrip("0").rstrip(".") if x == x else "nan"
    return x


@dataclass
class FigureSpec:
    name: str
    table: str
    x: str
    ys: Sequence[str]
    kind: str = "line"  # line | bar | hist
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    logy: bool = False
    reference: Optional[Sequence[float]] = None  # expected values drawn as markers


@dataclass
class Report:
    scenario: str
    seed: int
    config_digest: str
    tables: Dict[str, Table] = field(default_factory=dict)
    figures: List[FigureSpec] = field(default_factory=list)
    checks: Dict[str, bool] = field(default_factory=dict)
    notes: Dict[str, object] = field(default_factory=dict)

    def table(self, name: str, header: Sequence[str]) -> Table:
        t = Table(list(header))
        self.tables[name] = t
        return t

    def summary(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "config_digest": self.config_digest,
            "tables": {k: {"rows": len(t.rows), "sha256": hashlib.sha256(t.to_csv().encode()).hexdigest()}
                       for k, t in self.tables.items()},
            "checks": self.checks,
            "notes": self.notes,
        }

    def write(self, out_dir: str, figures: bool = True) -> List[str]:
        os.makedirs(out_dir, exist_ok=True)
        written = []
        for name, t in self.tables.items():
            path = os.path.join(out_dir, f"{name}.csv")
            with open(path, "w", newline="") as fh:
                fh.write(t.to_csv())
            written.append(path)
        path = os.path.join(out_dir, "summary.json")
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
        written.append(path)
        if figures and self.figures:
            from .plotting import render
            written.extend(render(self, out_dir))
        return written


def load_tables(out_dir: str) -> Dict[str, Table]:
    tables = {}
    for name in sorted(os.listdir(out_dir)):
        if not name.endswith(".csv"):
            continue
        with open(os.path.join(out_dir, name), newline="") as fh:
            rows = list(csv.reader(fh))
        if rows:
            tables[name[:-4]] = Table(rows[0], rows[1:])
    return tables


def format_table(name: str, table: Table, max_rows: int = 40) -> str:
    widths = [len(h) for h in table.header]
    for r in table.rows:
        for i, x in enumerate(r):
            widths[i] = max(widths[i], len(str(x)))
    line = "  ".join(h.ljust(w) for h, w in zip(table.header, widths))
    out = [f"== {name} ==", line, "-" * len(line)]
    for r in table.rows[:max_rows]:
        out.append("  ".join(str(x).ljust(w) for x, w in zip(r, widths)))
    if len(table.rows) > max_rows:
        out.append(f"... {len(table.rows) - max_rows} more rows")
    return "\n".join(out)
