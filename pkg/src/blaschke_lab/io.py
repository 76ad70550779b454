"""Readers and writers for parameter, path, spectrum and map files.

Complex numbers are [re, im] pairs; a point at infinity is written as null.
JSON output uses sorted keys so identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .moduli import BlaschkeParams, MarkedBlaschke, make_standard
from .spectra import PathSpec

SCHEMA = 1


def cnum(z) -> list[float] | None:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        return None
    return [z.real, z.imag]


def jsonable(obj):
    """Recursively turn numpy scalars, arrays and complex numbers into JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return cnum(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ValidationError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from None


def read_params(path) -> MarkedBlaschke:
    obj = _read_json(path)
    try:
        p = BlaschkeParams.from_json(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad parameter file {path}: {exc}") from None
    return make_standard(p.d, p.zeros)


def write_params(path, f: MarkedBlaschke) -> None:
    write_json(path, f.params.to_json())


def read_path(path) -> PathSpec:
    obj = _read_json(path)
    try:
        return PathSpec.from_json(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad path file {path}: {exc}") from None


def write_spectrum_csv(path, spec) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["period", "label", "multiplier", "point_angles", "imag_residue"])
        for e in spec.entries:
            angles = ";".join(repr(float(t)) for t in e.angles)
            w.writerow([e.cycle.period, e.cycle.label, repr(float(e.multiplier)), angles, repr(float(e.imag_residue))])


def read_spectrum_csv(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            rows.append(
                {
                    "period": int(r["period"]),
                    "label": int(r["label"]),
                    "multiplier": float(r["multiplier"]),
                    "point_angles": [float(t) for t in r["point_angles"].split(";")],
                    "imag_residue": float(r["imag_residue"]),
                }
            )
    return rows


def write_witness_csv(path, t0: float, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t0", "period", "label", "dlambda_dt", "fd_error"])
        for r in rows:
            w.writerow([repr(float(t0)), r.period, r.label, repr(r.dlambda_dt), repr(r.fd_error)])


def write_circle_csv(path, h) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "h"])
        for x, v in zip(h.x, h.values):
            w.writerow([repr(float(x)), repr(float(v))])
