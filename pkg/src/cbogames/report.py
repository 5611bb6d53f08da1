"""Experiment reports: gated verdicts plus JSON and CSV serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .metrics import FitResult

__all__ = ["ExperimentReport", "Verdict", "fmt_float", "write_csv"]

_OPS = {
    "<=": lambda v, t: v <= t,
    ">=": lambda v, t: v >= t,
    "<": lambda v, t: v < t,
    "==": lambda v, t: v == t,
}


@dataclass(frozen=True)
class Verdict:
    name: str
    value: float
    op: str
    threshold: float
    passed: bool

    @classmethod
    def check(cls, name, value, op, threshold):
        value = float(value)
        ok = math.isfinite(value) and bool(_OPS[op](value, threshold))
        return cls(name, value, op, float(threshold), ok)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {fmt_float(self.value)} {self.op} {fmt_float(self.threshold)}"


def fmt_float(x) -> str:
    """Shortest round-trip decimal form."""
    return repr(float(x))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, FitResult):
        return obj.to_dict()
    if isinstance(obj, Verdict):
        return {"name": obj.name, "value": _jsonable(obj.value), "op": obj.op,
                "threshold": _jsonable(obj.threshold), "passed": obj.passed}
    return obj


@dataclass
class ExperimentReport:
    name: str
    config: dict
    raw: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    wall_time: float = 0.0
    tables: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def verdict(self, name) -> Verdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)

    def summary(self) -> str:
        return "\n".join([f"[{self.name}] {'PASS' if self.passed else 'FAIL'} "
                          f"({self.wall_time:.1f}s)"] + ["  " + v.line() for v in self.verdicts])

    def to_dict(self) -> dict[str, Any]:
        return _jsonable({
            "name": self.name,
            "config": self.config,
            "passed": self.passed,
            "verdicts": self.verdicts,
            "fits": self.fits,
            "series": self.series,
            "raw": self.raw,
            "wall_time": self.wall_time,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    def write(self, directory, formats=("csv", "json")):
        """Write ``report.json`` and one CSV per entry of ``tables``; returns the paths."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        if "json" in formats:
            path = directory / "report.json"
            path.write_text(self.to_json() + "\n")
            paths.append(path)
        if "csv" in formats:
            for fname, (header, rows) in self.tables.items():
                path = directory / fname
                write_csv(path, header, rows)
                paths.append(path)
        return paths


def write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    Path(path).write_text(buf.getvalue())
