"""Experiment reports: deterministic JSON, flat CSV and plot-ready curves.

Data artifacts depend only on parameters and seed.  Wall-clock timings
live in ``timing`` and are written to a separate ``.meta.json`` file.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path


def _clean(value):
    """JSON-safe copy: tuples to lists, non-finite floats to strings, numpy scalars to Python."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


@dataclass
class ExperimentReport:
    name: str
    parameters: dict
    rows: list[dict] = field(default_factory=list)
    criteria: dict[str, bool] = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    def add(self, n, statistic: str, value, stderr=None) -> None:
        self.rows.append({"n": n, "statistic": statistic, "value": value, "stderr": stderr})

    def value(self, statistic: str, n=None):
        for row in self.rows:
            if row["statistic"] == statistic and (n is None or row["n"] == n):
                return row["value"]
        raise KeyError((statistic, n))

    def series(self, statistic: str) -> list[tuple]:
        return [(row["n"], row["value"]) for row in self.rows if row["statistic"] == statistic]

    @property
    def passed(self) -> bool:
        return all(self.criteria.values())

    def to_dict(self) -> dict:
        return _clean(
            {
                "experiment": self.name,
                "parameters": self.parameters,
                "rows": self.rows,
                "criteria": self.criteria,
                "passed": self.passed,
                "details": self.details,
                "metadata": self.metadata,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "statistic", "value", "stderr"])
        for row in self.rows:
            writer.writerow([_cell(row["n"]), row["statistic"], _cell(row["value"]), _cell(row["stderr"])])
        return buf.getvalue()

    def curves(self) -> dict[str, str]:
        """Two-column ``n,value`` CSV text per numeric statistic."""
        out = {}
        for stat in dict.fromkeys(row["statistic"] for row in self.rows):
            pts = self.series(stat)
            if not all(isinstance(v, (int, float)) for _, v in pts):
                continue
            lines = ["n,value"] + [f"{_cell(n)},{_cell(v)}" for n, v in pts]
            out[stat] = "\n".join(lines) + "\n"
        return out

    def summary_lines(self) -> list[str]:
        lines = [f"{self.name}: {'PASS' if self.passed else 'FAIL'}"]
        for name, ok in self.criteria.items():
            lines.append(f"  {'PASS' if ok else 'FAIL'} {name}")
        return lines

    def write(self, path: str | Path, fmt: str = "jsonl") -> list[Path]:
        """Write the report next to ``path``; returns the files written.

        ``jsonl`` writes the JSON document to ``path``; ``csv`` writes the
        flat table.  Both also write per-curve CSVs and the timing side file.
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        written = []
        if fmt == "csv":
            path.write_text(self.to_csv())
        else:
            path.write_text(self.to_json())
        written.append(path)
        stem = path.with_suffix("")
        for stat, text in self.curves().items():
            curve = Path(f"{stem}.{_slug(stat)}.csv")
            curve.write_text(text)
            written.append(curve)
        meta = Path(f"{stem}.meta.json")
        meta.write_text(json.dumps(_clean(self.timing), sort_keys=True, indent=2) + "\n")
        written.append(meta)
        return written


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _slug(text: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in text)
