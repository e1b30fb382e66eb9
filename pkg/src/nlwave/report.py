"""Report emission: JSON summary, text table, CSV timelines and binary snapshots.

Snapshot layout: little-endian float64 pairs ``(re, im)``, ordered time-major,
then mode-major (C-order flattened grid), channel-minor.  A JSON sidecar
carries the grid, ``N``, ``K``, ``T`` and the format version.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

SNAPSHOT_FORMAT_VERSION = 1
TIMING_KEY = "timings"


def to_jsonable(obj):
    """Recursively convert numpy and complex values to JSON-safe types.

    ``nan`` becomes ``None`` and infinities become the strings ``"inf"`` /
    ``"-inf"``; complex numbers become ``[re, im]``.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(float(obj.real)), to_jsonable(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(report: dict) -> str:
    """Canonical JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(to_jsonable(report), sort_keys=True, indent=2) + "\n"


def without_timings(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != TIMING_KEY}


def _leaves(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _leaves(obj[k], f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list):
        if len(obj) <= 8 and all(not isinstance(v, (dict, list)) for v in obj):
            yield prefix, obj
        else:
            yield prefix, f"[{len(obj)} entries]"
    else:
        yield prefix, obj


def text_table(report: dict) -> str:
    """Two-column table of every scalar leaf of the JSON report."""
    rows = list(_leaves(to_jsonable(report)))
    width = max((len(k) for k, _ in rows), default=0)
    lines = []
    for key, val in rows:
        if isinstance(val, float):
            sval = repr(val)
        elif isinstance(val, list):
            sval = "[" + ", ".join(repr(v) for v in val) + "]"
        else:
            sval = str(val)
        lines.append(f"{key.ljust(width)}  {sval}")
    return "\n".join(lines) + "\n"


def write_csv(path: Path, times, columns: dict):
    """One row per time sample; ``columns`` maps header to per-time values."""
    names = list(columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + names)
        for i, t in enumerate(times):
            w.writerow([repr(float(t))] + [repr(float(columns[n][i])) for n in names])


def write_snapshot(path: Path, values: np.ndarray, grid, T: float):
    """Write complex values ``(K+1, size, N)`` plus a JSON sidecar."""
    path = Path(path)
    arr = np.ascontiguousarray(np.asarray(values, dtype="<c16"))
    if arr.ndim == 2:
        arr = arr[None]
    path.write_bytes(arr.tobytes(order="C"))
    meta = {"grid": grid.describe(), "N": int(arr.shape[2]), "K": int(arr.shape[0] - 1),
            "T": float(T), "format_version": SNAPSHOT_FORMAT_VERSION,
            "layout": "little-endian float64 (re, im) pairs; time-major, mode-major, channel-minor"}
    Path(str(path) + ".json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def read_snapshot(path: Path):
    """Inverse of :func:`write_snapshot`; returns ``(values, sidecar)``."""
    path = Path(path)
    meta = json.loads(Path(str(path) + ".json").read_text())
    if meta.get("format_version") != SNAPSHOT_FORMAT_VERSION:
        raise ValueError(f"unsupported snapshot format {meta.get('format_version')}")
    size = meta["grid"]["points"] ** meta["grid"]["dim"]
    raw = np.frombuffer(path.read_bytes(), dtype="<c16")
    expected = (meta["K"] + 1) * size * meta["N"]
    if raw.size != expected:
        raise ValueError(f"snapshot holds {raw.size} values, sidecar implies {expected}")
    return raw.reshape(meta["K"] + 1, size, meta["N"]).astype(complex), meta
