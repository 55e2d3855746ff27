"""
CSV and JSON interchange.  CSV files use ',' separators, '.' decimals, LF line
endings and a mandatory header; measures travel as a CSV of atoms plus a JSON
sidecar with the scalar metadata.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .measures import AtomicMeasure, MeasureError, PattersonDensity


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for r in rows:
            w.writerow([_fmt(x) for x in r])
    return path


def read_csv(path):
    """(header, float array of rows); non-numeric cells become nan."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise MeasureError(f"{path}: empty CSV (a header is mandatory)")
    header, body = rows[0], rows[1:]

    def num(c):
        try:
            return float(c)
        except ValueError:
            return math.nan

    data = np.array([[num(c) for c in r] for r in body], dtype=float).reshape(len(body), len(header))
    return header, data


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# measures

BOUNDARY_COLS = ["theta", "weight", "source"]
TANGENT_COLS = ["a", "b", "c", "d", "weight", "source"]


def save_measure(m: AtomicMeasure, path, meta: dict = None) -> Path:
    """Write atoms to path (CSV) and metadata to path with a .json suffix."""
    path = Path(path)
    src = m.source if m.source is not None else np.full(len(m), -1)
    if m.kind == "boundary":
        rows = zip(m.atoms, m.weights, src)
        cols = BOUNDARY_COLS
    else:
        rows = ((*f, w, s) for f, w, s in zip(m.atoms, m.weights, src))
        cols = TANGENT_COLS
    write_csv(path, cols, rows)
    side = {"kind": m.kind, "basepoint": m.basepoint, "total": m.total, "n_atoms": len(m)}
    side.update(meta or {})
    write_json(path.with_suffix(".json"), side)
    return path


def load_measure(path) -> tuple:
    """(AtomicMeasure, sidecar dict)."""
    path = Path(path)
    side = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    header, data = read_csv(path)
    kind = side["kind"]
    want = BOUNDARY_COLS if kind == "boundary" else TANGENT_COLS
    if header != want:
        raise MeasureError(f"{path}: header {header} does not match {want}")
    src = data[:, -1].astype(np.int64)
    atoms = data[:, 0] if kind == "boundary" else data[:, :4]
    bp = complex(*side["basepoint"])
    m = AtomicMeasure(atoms, data[:, -2], kind, bp, None if np.all(src < 0) else src)
    return m, side


def save_patterson(P: PattersonDensity, path) -> Path:
    meta = {"delta": P.delta, "s_used": P.s_used, "radius": P.orbit_radius, "horizon": P.horizon}
    return save_measure(P.base, path, meta)


def load_patterson(path) -> PattersonDensity:
    m, side = load_measure(path)
    return PattersonDensity(m, float(side["delta"]), float(side["s_used"]), float(side["radius"]),
                            float(side.get("horizon", 0.0)))
