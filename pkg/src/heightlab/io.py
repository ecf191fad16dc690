"""Flat-file serialization: CSV with '# key=value' metadata headers.

Floats are written with repr so round-trips through text are bit-exact.
Every artifact carries the config hash and master seed that produced it,
never a timestamp, so identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def write_csv(path, columns: dict, meta: dict | None = None) -> Path:
    """Write named columns plus sorted metadata headers."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    n_rows = len(arrays[0]) if arrays else 0
    if any(len(a) != n_rows for a in arrays):
        raise ValueError("column length mismatch")
    with open(path, "w", newline="") as fh:
        for key in sorted(meta or {}):
            fh.write(f"# {key}={meta[key]}\n")
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(n_rows):
            writer.writerow([_cell(a[i]) for a in arrays])
    return path


def read_csv(path):
    """Inverse of write_csv: (columns dict of float arrays, meta dict)."""
    meta: dict = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val
                continue
            rows.append(line)
    parsed = list(csv.reader(rows))
    names = parsed[0]
    cols = {n: [] for n in names}
    for row in parsed[1:]:
        for n, cell in zip(names, row):
            cols[n].append(cell)
    out = {}
    for n, cells in cols.items():
        try:
            out[n] = np.array([float(c) for c in cells])
        except ValueError:
            out[n] = np.array(cells)
    return out, meta


def _cell(value):
    if isinstance(value, (np.floating, float)):
        return repr(float(value))
    if isinstance(value, (np.integer, int)):
        return int(value)
    return value


def save_field(path, sites: np.ndarray, values: np.ndarray, meta: dict | None = None):
    """Store lattice sites and per-site values; exact round-trip."""
    sites = np.atleast_2d(np.asarray(sites))
    values = np.asarray(values, dtype=float)
    if len(sites) != len(values):
        raise ValueError("sites and values length mismatch")
    cols = {f"x{i}": sites[:, i] for i in range(sites.shape[1])}
    cols["value"] = values
    return write_csv(path, cols, meta)


def load_field(path):
    """Inverse of save_field: (sites int array, values, meta)."""
    cols, meta = read_csv(path)
    axes = sorted(n for n in cols if n.startswith("x"))
    sites = np.stack([cols[a] for a in axes], axis=1).astype(int)
    return sites, cols["value"], meta
