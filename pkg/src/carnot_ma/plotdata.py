"""Plot-ready CSV series: 1-D slices and level-set polylines of grid functions."""

from __future__ import annotations

import csv
import io

import contourpy
import numpy as np

from .grid import GridFunction, atomic_write_text


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(x) -> str:
    return format(float(x), ".12g")


def slices(u: GridFunction, exact: GridFunction | None = None) -> list[tuple]:
    """Lines through the central node along each axis: ``(axis, t, value, exact)``."""
    g = u.grid
    mid = [r // 2 for r in g.shape]
    rows = []
    for k, axis in enumerate(g.axes()):
        idx = list(mid)
        idx[k] = slice(None)
        vals = u.values[tuple(idx)]
        ref = exact.values[tuple(idx)] if exact is not None else [None] * len(axis)
        for t, v, e in zip(axis, vals, ref):
            rows.append((f"x{k + 1}", _num(t), _num(v), "" if e is None else _num(e)))
    return rows


def level_sets(u: GridFunction, n_levels: int = 8, axes=(0, 1)) -> list[tuple]:
    """Contour polylines on the central plane spanned by ``axes``.

    Rows are ``(level, polyline, vertex, a, b)``; levels are evenly spaced
    strictly between the plane's min and max.
    """
    g = u.grid
    if g.n < 2:
        return []
    i, j = axes
    idx = [r // 2 for r in g.shape]
    idx[i] = idx[j] = slice(None)
    plane = u.values[tuple(idx)]
    if i > j:
        plane = plane.T
    lo, hi = float(plane.min()), float(plane.max())
    if not hi > lo:
        return []
    levels = np.linspace(lo, hi, n_levels + 2)[1:-1]
    gen = contourpy.contour_generator(g.axes()[i], g.axes()[j], plane.T, line_type="Separate")
    rows = []
    for lev in levels:
        for p, line in enumerate(gen.lines(lev)):
            rows.extend((_num(lev), p, v, _num(a), _num(b)) for v, (a, b) in enumerate(line))
    return rows


def write_plot_data(u: GridFunction, out_dir, prefix: str = "", exact: GridFunction | None = None):
    """Write ``<prefix>slices.csv`` and ``<prefix>levelsets.csv`` into ``out_dir``."""
    atomic_write_text(f"{out_dir}/{prefix}slices.csv", _csv(slices(u, exact), ["axis", "t", "value", "exact"]))
    atomic_write_text(f"{out_dir}/{prefix}levelsets.csv",
                      _csv(level_sets(u), ["level", "polyline", "vertex", "a", "b"]))
