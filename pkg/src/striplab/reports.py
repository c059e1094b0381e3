"""Deterministic JSON and CSV serialisation of reports."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, is_dataclass

import numpy as np

from .errors import IoFailure


def _fmt_float(x):
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    if x == int(x) and abs(x) < 1e16:
        # keep a decimal point so readers see a float
        return format(x, ".1f")
    return format(x, ".17g")


def _plain(obj):
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if is_dataclass(obj):
        return asdict(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps_json(obj, indent=2, _level=0):
    """JSON text with sorted keys and floats printed to 17 significant digits."""
    obj = _plain(obj)
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f"{pad}{json.dumps(str(k))}: {dumps_json(obj[k], indent, _level + 1)}"
            for k in sorted(obj, key=str)
        ]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [dumps_json(x, indent, _level + 1) for x in obj]
        if all(not isinstance(_plain(x), (dict, list, tuple)) for x in obj):
            return "[" + ", ".join(items) + "]"
        return "[\n" + ",\n".join(pad + i for i in items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_csv(rows, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        out = []
        for c in columns:
            x = _plain(row[c])
            out.append(_fmt_float(x) if isinstance(x, float) else str(x))
        w.writerow(out)
    return buf.getvalue()


def write_report(report, fmt, path, columns=None):
    """Write ``report`` as ``json`` or ``csv`` (``report`` is then a list of rows)."""
    if fmt == "json":
        text = dumps_json(report) + "\n"
    elif fmt == "csv":
        if columns is None:
            columns = list(report[0].keys()) if report else []
        text = dumps_csv(report, columns)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
