"""CSV and JSON writers with fixed 17-significant-digit floats.

The digit count can be overridden through ``GDPEP_DIGITS``.
"""

from __future__ import annotations

import io
import json
import math
import os

CSV_HEADER = ("gamma", "branch_mu", "branch_rho", "bound", "min_form", "regime")


def digits():
    return int(os.environ.get("GDPEP_DIGITS", "17"))


def format_float(x, nan="nan"):
    x = float(x)
    if math.isnan(x):
        return nan
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, f".{digits()}g")


def _json_float(x):
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    text = format(x, f".{digits()}g")
    # keep floats recognisable as floats after a round trip
    if all(ch not in text for ch in ".eE"):
        text += ".0"
    return text


def dumps_json(obj, indent=2, _level=0):
    """JSON text with every float printed at fixed precision; key order is preserved."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _json_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps_json(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps_json(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(obj, "__float__"):
        return _json_float(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def sweep_csv(rows):
    """rows: iterables of (gamma, branch_mu, branch_rho, bound, min_form, regime); None -> nan."""
    buf = io.StringIO()
    buf.write(",".join(CSV_HEADER) + "\n")
    for row in rows:
        cells = []
        for value in row:
            if isinstance(value, str):
                cells.append(value)
            elif value is None:
                cells.append("nan")
            else:
                cells.append(format_float(value))
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def human(mapping):
    lines = []
    for key, value in mapping.items():
        if isinstance(value, float):
            value = format_float(value)
        elif value is None:
            value = "n/a"
        lines.append(f"{key}: {value}")
    return "\n".join(lines) + "\n"
