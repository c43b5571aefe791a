"""File formats for observable streams and state snapshots.

Observable streams are CSV with a self-describing header row.  Dense grids
(charts, Wigner functions) carry two axis header lines followed by
row-major values.  State snapshots are binary: an int64 header
(rank, dims...) followed by row-major little-endian complex128 pairs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def write_csv(path, columns: dict) -> None:
    """Write named columns (equal-length 1-d arrays) as CSV."""
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    n_rows = len(arrays[0])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(n_rows):
            writer.writerow([repr(a[i].item()) for a in arrays])


def read_csv(path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        names = next(reader)
        rows = list(reader)
    out = {}
    for j, name in enumerate(names):
        vals = [complex(r[j].strip("()")) for r in rows]
        arr = np.array(vals)
        out[name] = arr.real if np.all(arr.imag == 0) else arr
    return out


def write_grid(path, x_axis, y_axis, values, x_name="x", y_name="y") -> None:
    """Dense grid: two axis header lines, then values row-major
    (one row per y, columns over x)."""
    values = np.asarray(values)
    if values.shape != (len(y_axis), len(x_axis)):
        raise ValueError(
            f"grid shape {values.shape} does not match axes "
            f"({len(y_axis)}, {len(x_axis)})"
        )
    with open(path, "w") as fh:
        fh.write(f"# {x_name}: " + " ".join(repr(float(v)) for v in x_axis) + "\n")
        fh.write(f"# {y_name}: " + " ".join(repr(float(v)) for v in y_axis) + "\n")
        np.savetxt(fh, values)


def read_grid(path):
    with open(path) as fh:
        x_line = fh.readline()
        y_line = fh.readline()
        values = np.loadtxt(fh)
    x = np.array([float(v) for v in x_line.split(":", 1)[1].split()])
    y = np.array([float(v) for v in y_line.split(":", 1)[1].split()])
    return x, y, values.reshape(len(y), len(x))


def write_snapshot(path, array) -> None:
    """Binary layout: int64 rank, int64 dims..., little-endian complex128
    row-major data."""
    arr = np.ascontiguousarray(array, dtype=complex)
    with open(path, "wb") as fh:
        header = np.array([arr.ndim, *arr.shape], dtype="<i8")
        header.tofile(fh)
        arr.astype("<c16").tofile(fh)


def read_snapshot(path) -> np.ndarray:
    with open(path, "rb") as fh:
        rank = int(np.fromfile(fh, dtype="<i8", count=1)[0])
        dims = np.fromfile(fh, dtype="<i8", count=rank)
        data = np.fromfile(fh, dtype="<c16")
    return data.reshape(tuple(int(d) for d in dims))


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
