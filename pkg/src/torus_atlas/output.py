"""Deterministic CSV, JSON and binary writers.

Floats are written with 17 significant digits; non-finite values become
``nan``/``inf`` strings in CSV and ``null`` in JSON.
"""
from __future__ import annotations

import json
import math
import struct
from pathlib import Path

import numpy as np

__all__ = ["fmt", "to_builtin", "write_csv", "write_json", "dumps", "save_tori", "load_tori"]


def fmt(x):
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
        return "%.17g" % x
    return str(x)


def to_builtin(obj):
    if isinstance(obj, dict):
        return {str(k): to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_builtin(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_builtin(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _emit(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_emit(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_emit(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _emit(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return "null" if not math.isfinite(obj) else "%.17g" % obj
    return json.dumps(obj)


def dumps(obj, indent=2):
    """JSON text with floats at 17 significant digits."""
    return _emit(to_builtin(obj), indent, 0) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj), encoding="utf-8")


def write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(fmt(x) for x in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_tori(path, tori):
    """Binary dump of solved tori.

    Layout: little-endian uint64 header length, UTF-8 JSON header, then for
    each torus its ``(6, N, N)`` complex coefficients as interleaved
    little-endian float64 (real, imag) in C order.
    """
    header = {"format": "torus-atlas-tori", "version": 1, "tori": []}
    blobs = []
    for st in tori:
        c = np.ascontiguousarray(st.K.coeffs, dtype="<c16")
        header["tori"].append({
            "N": int(st.K.N), "omega": [float(x) for x in st.omega], "epsilon": float(st.epsilon),
            "perturbation_id": int(st.perturbation_id), "residual": float(st.residual),
            "winding": int(st.K.winding), "nbytes": int(c.nbytes),
        })
        blobs.append(c.view("<f8").tobytes())
    head = dumps(header, indent=0).encode("utf-8")
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(head)))
        f.write(head)
        for b in blobs:
            f.write(b)


def load_tori(path):
    """Inverse of :func:`save_tori`: ``(header, [TorusEmbedding, ...])``."""
    from .torus import TorusEmbedding
    with open(path, "rb") as f:
        (n,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(n).decode("utf-8"))
        out = []
        for t in header["tori"]:
            raw = np.frombuffer(f.read(t["nbytes"]), dtype="<f8").view("<c16")
            coeffs = raw.reshape(6, t["N"], t["N"]).astype(complex)
            out.append(TorusEmbedding(coeffs, np.asarray(t["omega"]), t["winding"],
                                      {"epsilon": t["epsilon"], "residual": t["residual"]}))
    return header, out
