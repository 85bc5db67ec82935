"""Verification reports and their deterministic serialisation."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

import numpy as np


def _clean(value: Any) -> Any:
    """Make a value JSON-safe: numpy scalars to Python, non-finite to strings."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        try:
            value = value.item()
        except (ValueError, AttributeError):
            value = value.tolist()
            return _clean(value)
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, complex):
        return [_clean(value.real), _clean(value.imag)]
    return str(value)


def dumps(obj: Any) -> str:
    """Canonical JSON: fixed key order, round-trip float repr."""
    return json.dumps(_clean(obj), indent=2, sort_keys=False, allow_nan=False)


def digest(inputs: dict) -> str:
    text = json.dumps(_clean(inputs), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class VerificationReport:
    check_name: str
    inputs: dict
    statistics: dict
    tolerance: dict
    passed: bool
    grid_meta: dict = field(default_factory=dict)
    seed: Optional[int] = None
    notes: list = field(default_factory=list)
    # Per-row data written to CSV next to the JSON report.
    table: Optional[dict] = None

    @property
    def inputs_digest(self) -> str:
        return digest(self.inputs)

    def to_json_dict(self) -> dict:
        return {
            "check_name": self.check_name,
            "inputs": self.inputs,
            "inputs_digest": self.inputs_digest,
            "statistics": self.statistics,
            "tolerance": self.tolerance,
            "pass": bool(self.passed),
            "grid_meta": self.grid_meta,
            "seed": self.seed,
            "notes": list(self.notes),
        }

    def summary_line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        stats = ", ".join(f"{k}={_fmt(v)}" for k, v in list(self.statistics.items())[:4])
        if not stats and self.notes:
            stats = self.notes[0]
        return f"[{flag}] {self.check_name}: {stats}"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def failed_precondition(check_name: str, inputs: dict, error: Exception,
                        seed: Optional[int] = None) -> VerificationReport:
    return VerificationReport(check_name=check_name, inputs=inputs, statistics={},
                              tolerance={}, passed=False, seed=seed,
                              notes=[f"precondition failed: {type(error).__name__}: {error}"])


def format_number(x: float) -> str:
    """Round-trip decimal, locale independent."""
    return repr(float(x))


def _cell(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_number(v)
    return str(v)


def table_to_csv(columns: dict) -> str:
    names = list(columns)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in zip(*(columns[n] for n in names)):
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_reports(reports: Iterable[VerificationReport], stream) -> None:
    stream.write(dumps([r.to_json_dict() for r in reports]))
    stream.write("\n")
