"""Coefficient, grid and report serialization."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .field import ScalarField, VectorField, sample_on_grid

_FMT = "%.17g"


def _fmt(x):
    return _FMT % x


def write_coefficients(path, field):
    """CSV with columns xi_1..xi_n, component, re, im; only nonzero entries."""
    n, M = field.dim, field.M
    c = field.coeffs
    comp = field.component_shape
    ncomp = int(np.prod(comp)) if comp else 1
    flat = c.reshape((ncomp,) + (2 * M + 1,) * n)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"xi_{k + 1}" for k in range(n)] + ["component", "re", "im"])
        for idx in np.ndindex(*flat.shape):
            val = flat[idx]
            if val == 0:
                continue
            xi = [i - M for i in idx[1:]]
            w.writerow(xi + [idx[0], _fmt(val.real), _fmt(val.imag)])
    return path


def read_coefficients(path, dim=None, M=None, kind=None, real_valued=True, zero_mean=True):
    """Inverse of :func:`write_coefficients`.

    The dimension is taken from the header; ``M`` defaults to the largest
    index present and ``kind`` to "vector" when several components appear.
    """
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    n = sum(1 for h in header if h.startswith("xi_"))
    if dim is not None and dim != n:
        raise ValueError(f"file has dimension {n}, expected {dim}")
    entries = [([int(v) for v in r[:n]], int(r[n]), complex(float(r[n + 1]), float(r[n + 2])))
               for r in rows[1:] if r]
    if M is None:
        M = max([max(abs(k) for k in xi) for xi, _, _ in entries] or [1])
    if kind is None:
        kind = "vector" if any(cmp > 0 for _, cmp, _ in entries) else "scalar"
    comp = (n,) if kind == "vector" else ()
    c = np.zeros(comp + (2 * M + 1,) * n, dtype=complex)
    for xi, cmp, val in entries:
        idx = tuple(k + M for k in xi)
        if kind == "vector":
            c[(cmp,) + idx] = val
        else:
            c[idx] = val
    cls = VectorField if kind == "vector" else ScalarField
    return cls(c, n, real_valued=real_valued, zero_mean=zero_mean)


def write_grid(path, field, N=None):
    """CSV of point values on the N^n grid: x_1..x_n then one column per component."""
    n, M = field.dim, field.M
    N = N or 2 * M + 1
    vals = sample_on_grid(field, N)
    comp = field.component_shape
    ncomp = int(np.prod(comp)) if comp else 1
    vals = vals.reshape((ncomp,) + (N,) * n)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        names = [f"v_{k + 1}" for k in range(ncomp)] if comp else ["v"]
        w.writerow([f"x_{k + 1}" for k in range(n)] + names)
        for idx in np.ndindex(*(N,) * n):
            row = [_fmt(i / N) for i in idx]
            for k in range(ncomp):
                v = vals[(k,) + idx]
                row.append(_fmt(v.real) if np.isrealobj(vals) else f"{_fmt(v.real)}{_fmt(v.imag):+}j")
            w.writerow(row)
    return path


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def dumps_report(report):
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


def write_report(path, report):
    path = Path(path)
    path.write_text(dumps_report(report))
    return path


def write_table(path, rows, columns):
    """Delimited table with a fixed column order."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
    return path
