"""CSV and JSON reports for sweep results."""

from __future__ import annotations

import csv
import io
import json

from ..errors import InvalidInputError
from .experiment import ResultRow

METRIC_COLUMNS = ("mean_acc_baseline", "mean_acc_robust", "std_baseline", "std_robust",
                  "seconds")


def fmt(x) -> str:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        return str(x)
    return format(float(x), ".6g")


def _param_columns(rows) -> list:
    return sorted({k for row in rows for k in row.params})


def _metrics(row: ResultRow) -> dict:
    return {name: getattr(row, name) for name in METRIC_COLUMNS}


def emit_report(rows, format: str = "csv") -> str:
    if not rows:
        raise InvalidInputError("no rows to report")
    columns = _param_columns(rows)
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns + list(METRIC_COLUMNS))
        for row in rows:
            writer.writerow([fmt(row.params.get(c, "")) for c in columns]
                            + [fmt(v) for v in _metrics(row).values()])
        return buf.getvalue()
    if format == "json":
        doc = []
        for row in rows:
            entry = {"params": {c: _rounded(row.params[c]) for c in columns if c in row.params}}
            entry.update({k: _rounded(v) for k, v in _metrics(row).items()})
            entry["per_seed_baseline"] = [_rounded(v) for v in row.per_seed_baseline]
            entry["per_seed_robust"] = [_rounded(v) for v in row.per_seed_robust]
            doc.append(entry)
        return json.dumps(doc, indent=2) + "\n"
    raise InvalidInputError(f"unknown report format {format!r}")


def _rounded(x):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        return x
    return float(fmt(x)) if isinstance(x, float) else x


def parse_report(text: str, format: str) -> list:
    """Read a report back as a list of flat dicts (params plus metrics)."""
    if format == "json":
        out = []
        for entry in json.loads(text):
            flat = dict(entry["params"])
            flat.update({k: entry[k] for k in METRIC_COLUMNS})
            out.append(flat)
        return out
    if format == "csv":
        out = []
        for rec in csv.DictReader(io.StringIO(text)):
            out.append({k: _parse_number(v) for k, v in rec.items()})
        return out
    raise InvalidInputError(f"unknown report format {format!r}")


def _parse_number(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def rows_from_flat(flat_rows) -> list:
    """Turn parsed report rows into :class:`ResultRow`-like records for re-emission."""
    rows = []
    for rec in flat_rows:
        params = {k: v for k, v in rec.items() if k not in METRIC_COLUMNS}
        rows.append(_FlatRow(params, {k: rec[k] for k in METRIC_COLUMNS}))
    return rows


class _FlatRow:
    """Report row without per-seed data, as recovered from CSV."""

    def __init__(self, params, metrics):
        self.params = params
        self.per_seed_baseline = []
        self.per_seed_robust = []
        for k, v in metrics.items():
            setattr(self, k, v)
