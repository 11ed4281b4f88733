"""CSV and JSON output with fixed 17-significant-digit floats."""
from __future__ import annotations

import math
import os

import numpy as np

TRACE_HEADER = ("t", "z", "y", "xi", "eta", "energy", "L")
FRONTFACE_HEADER = ("tau", "chart", "coord", "y", "theta", "G")
WINDING_HEADER = ("epsilon", "phi", "v0", "angl_measured", "angl_predicted", "rel_error")
FOCUSSING_HEADER = ("epsilon", "seed", "y0", "theta0", "y_end", "theta_end", "dist_to_min", "basin")


def fmt(x):
    """Locale-independent float text at 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    if x is None:
        return ""
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(fmt(v) for v in r) + "\n")


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    out = []
    for ln in lines[1:]:
        vals = []
        for v in ln.split(","):
            try:
                vals.append(float(v))
            except ValueError:
                vals.append(v)
        out.append(dict(zip(header, vals)))
    return header, out


def _json(obj, ind, level):
    pad = " " * (ind * (level + 1))
    end = " " * (ind * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_jstr(str(k))}: {_json(v, ind, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{_json(v, ind, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(obj, complex):
        return _json([obj.real, obj.imag], ind, level)
    return _jstr(str(obj))


def _jstr(s):
    import json
    return json.dumps(s, ensure_ascii=True)


def dumps(obj, indent=2):
    return _json(obj, indent, 0) + "\n"


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))


def trace_rows(trace):
    """Rows of the trace CSV for a GeodesicTrace."""
    st = trace.states
    return [(t, s[0], s[1], s[2], s[3], e, L)
            for t, s, e, L in zip(trace.t, st, trace.energy, trace.L)]


def frontface_rows(tr):
    return [(t, c, a, y, th, g) for t, c, a, y, th, g in
            zip(tr.tau, tr.chart, tr.coord, tr.y, tr.theta, tr.G)]


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
