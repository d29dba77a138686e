"""Serialization of sampled fields: CSV, raw binary with a JSON sidecar, PGM."""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .errors import UsageError
from .oracle import GridField


def save_csv(path, field: GridField):
    """Write one row per grid cell: coordinates, real part, imaginary part."""
    pts = field.points()
    vals = field.values.ravel()
    headers = ["x", "y", "z"][: field.dim] + ["re", "im"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(headers)
        for p, v in zip(pts, vals):
            w.writerow(
                [repr(float(c)) for c in p] + [repr(float(v.real)), repr(float(v.imag))]
            )


def load_csv(path):
    """Read a CSV written by save_csv; returns (points, complex values)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise UsageError(f"empty CSV: {path}")
    header = rows[0]
    if header[-2:] != ["re", "im"]:
        raise UsageError(f"unexpected CSV header in {path}: {header}")
    body = np.array([[float(c) for c in row] for row in rows[1:]], dtype=float)
    return body[:, :-2], body[:, -2] + 1j * body[:, -1]


def save_binary(path, field: GridField):
    """Write interleaved (re, im) float64 little-endian plus a JSON sidecar."""
    inter = np.empty(field.values.size * 2, dtype="<f8")
    flat = field.values.ravel()
    inter[0::2] = flat.real
    inter[1::2] = flat.imag
    inter.tofile(path)
    sidecar = {
        "dims": list(field.values.shape),
        "spacing": [float(s) for s in field.spacing],
        "origin": [float(o) for o in field.origin],
        "dtype": "complex128-interleaved-le",
    }
    with open(path + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")


def load_binary(path):
    """Read a binary field written by save_binary; returns a GridField."""
    side_path = path + ".json"
    if not os.path.exists(side_path):
        raise UsageError(f"missing sidecar {side_path}")
    with open(side_path) as fh:
        side = json.load(fh)
    if side.get("dtype") != "complex128-interleaved-le":
        raise UsageError(f"unsupported dtype in sidecar: {side.get('dtype')}")
    raw = np.fromfile(path, dtype="<f8")
    dims = tuple(int(d) for d in side["dims"])
    n = int(np.prod(dims))
    if raw.size != 2 * n:
        raise UsageError(
            f"binary payload has {raw.size} floats, sidecar dims imply {2 * n}"
        )
    vals = (raw[0::2] + 1j * raw[1::2]).reshape(dims)
    return GridField(vals, side["origin"], side["spacing"])


def write_pgm(path, image, lo, hi):
    """8-bit binary PGM with a linear map of [lo, hi] onto [0, 255]."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise UsageError("PGM output requires a 2D array")
    if not hi > lo:
        raise UsageError(f"bad PGM range [{lo}, {hi}]")
    scaled = np.clip((img - lo) / (hi - lo) * 255.0, 0.0, 255.0)
    data = np.flipud(scaled).astype(np.uint8)  # row 0 at the top of the image
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def save_heatmaps(prefix, field: GridField):
    """Write <prefix>_re.pgm (Re E over [-max|E|, +max|E|]) and
    <prefix>_abs.pgm (|E| over [0, max|E|])."""
    if field.dim != 2:
        raise UsageError("heatmaps require a 2D field")
    peak = float(np.abs(field.values).max())
    if peak == 0.0:
        peak = 1.0
    write_pgm(prefix + "_re.pgm", field.values.real, -peak, peak)
    write_pgm(prefix + "_abs.pgm", np.abs(field.values), 0.0, peak)
    return prefix + "_re.pgm", prefix + "_abs.pgm"
