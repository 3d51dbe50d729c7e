"""CSV / JSON writers and readers for curves, threshold rows and run manifests.

Floats are written with 17 significant digits so every value round-trips.
Metadata travels in ``# key=value`` comment lines ahead of the CSV header.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import sys
from contextlib import contextmanager
from importlib import metadata

import numpy as np

from .study import REPORT_COLUMNS, ThresholdReport
from .uncoupled import ExitCurve

CURVE_COLUMNS = ("param", "eps", "h")


def fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def package_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def manifest_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@contextmanager
def _open_out(dest):
    if dest is None or dest == "-":
        yield sys.stdout
    elif hasattr(dest, "write"):
        yield dest
    else:
        with open(dest, "w", newline="") as fh:
            yield fh


def _write_meta(fh, meta):
    for key, val in meta.items():
        if val is not None:
            fh.write(f"# {key}={fmt(val)}\n")


def write_curve_csv(curve: ExitCurve, dest, kind="ebp", extra_meta=None):
    meta = {"kind": kind, "k": curve.k, "gamma": curve.gamma, "eps": curve.channel_eps,
            "area": curve.area, "n": len(curve)}
    meta.update({f"marker.{k}": v for k, v in curve.markers.items()})
    meta.update(extra_meta or {})
    with _open_out(dest) as fh:
        _write_meta(fh, meta)
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for row in zip(curve.param, curve.eps, curve.h):
            writer.writerow([fmt(v) for v in row])


def _parse_meta_value(text):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def read_curve_csv(src):
    """Parse a curve CSV; returns ``(ExitCurve, meta_dict)``."""
    with open(src) as fh:
        lines = fh.read().splitlines()
    meta, body = {}, []
    for line in lines:
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key] = _parse_meta_value(val)
        elif line.strip():
            body.append(line)
    if not body or tuple(body[0].split(",")) != CURVE_COLUMNS:
        raise ValueError(f"{src}: expected header {','.join(CURVE_COLUMNS)}")
    data = np.array([[float(v) for v in line.split(",")] for line in body[1:]]).reshape(-1, 3)
    markers = {k[len("marker."):]: v for k, v in meta.items() if k.startswith("marker.")}
    curve = ExitCurve(data[:, 0], data[:, 1], data[:, 2], float(meta.get("area", math.nan)),
                      meta.get("k"), meta.get("gamma"), meta.get("eps"), markers)
    return curve, meta


def write_rows_csv(rows, dest, meta=None):
    """Write a list of flat dicts (shared keys) as CSV with ``# key=value`` metadata."""
    cols = list(rows[0]) if rows else []
    with _open_out(dest) as fh:
        _write_meta(fh, meta or {})
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for r in rows:
            writer.writerow(["" if r[c] is None else fmt(r[c]) for c in cols])


def write_reports_csv(rows, dest, meta=None):
    with _open_out(dest) as fh:
        _write_meta(fh, meta or {})
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS + ("error",))
        for r in rows:
            row = r.as_row()
            writer.writerow([fmt(row[c]) for c in REPORT_COLUMNS] + [row["error"]])


def write_reports_long(rows, dest, meta=None):
    """One line per ``(k, beta, N, w, quantity)``; convenient for plotting tools."""
    quantities = REPORT_COLUMNS[4:]
    with _open_out(dest) as fh:
        _write_meta(fh, meta or {})
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("k", "beta", "N", "w", "quantity", "value"))
        for r in rows:
            row = r.as_row()
            for q in quantities:
                writer.writerow([r.k, fmt(r.beta), r.N, r.w, q, fmt(row[q])])


def read_reports_csv(src):
    """Parse a report CSV back into :class:`ThresholdReport` rows (gaps are recomputed)."""
    with open(src) as fh:
        body = [line for line in fh if not line.startswith("#")]
    out = []
    for rec in csv.DictReader(body):
        out.append(ThresholdReport(
            int(rec["k"]), float(rec["beta"]), int(rec["N"]), int(rec["w"]),
            float(rec["eps_bp"]), float(rec["eps_bp_coupled"]), float(rec["eps_area"]),
            float(rec["eps_potential"]), float(rec["eps_modified"]), rec.get("error") or None,
        ))
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(obj, dest):
    with _open_out(dest) as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def reports_to_json(rows):
    return [r.as_json() for r in rows]
