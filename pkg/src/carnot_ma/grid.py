"""Uniform lattices on boxes, grid functions, and their CSV/JSON storage."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

FORMAT_VERSION = 1


@dataclass(frozen=True)
class Box:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or not lo:
            raise ValueError("box corners must have the same positive dimension")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError(f"box has empty interior: lower={lo}, upper={hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def center(self) -> np.ndarray:
        return (np.array(self.lower) + np.array(self.upper)) / 2

    def scaled(self, fraction: float) -> "Box":
        """Concentric box with side lengths multiplied by ``fraction``."""
        c = self.center
        half = (np.array(self.upper) - np.array(self.lower)) * fraction / 2
        return Box(tuple(c - half), tuple(c + half))

    def contains(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.all((pts >= np.array(self.lower) - tol) & (pts <= np.array(self.upper) + tol), axis=1)

    def strictly_inside(self, other: "Box") -> bool:
        """True when the closure of ``self`` lies in the open box ``other``."""
        return all(a > b for a, b in zip(self.lower, other.lower)) and all(
            a < b for a, b in zip(self.upper, other.upper))


@dataclass(frozen=True)
class Grid:
    """Node lattice on ``box``; ``resolution`` counts nodes per axis."""

    box: Box
    resolution: tuple[int, ...]

    def __post_init__(self):
        res = tuple(int(r) for r in np.broadcast_to(self.resolution, (self.box.dim,)))
        if min(res) < 3:
            raise ValueError(f"need at least 3 nodes per axis, got {res}")
        object.__setattr__(self, "resolution", res)

    @property
    def n(self) -> int:
        return self.box.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.resolution

    @property
    def h(self) -> np.ndarray:
        return (np.array(self.box.upper) - np.array(self.box.lower)) / (np.array(self.resolution) - 1)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, r) for lo, hi, r in zip(self.box.lower, self.box.upper, self.resolution)]

    def points(self) -> np.ndarray:
        """All node coordinates, ``(prod(shape), n)`` in C order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for ax in range(self.n):
            idx = [slice(None)] * self.n
            idx[ax] = 0
            mask[tuple(idx)] = True
            idx[ax] = -1
            mask[tuple(idx)] = True
        return mask

    def interior_slice(self) -> tuple[slice, ...]:
        return (slice(1, -1),) * self.n

    @property
    def interior_shape(self) -> tuple[int, ...]:
        return tuple(r - 2 for r in self.resolution)

    def interior_points(self) -> np.ndarray:
        mesh = np.meshgrid(*[a[1:-1] for a in self.axes()], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def interior_mask_in(self, box: Box) -> np.ndarray:
        """Flat mask over interior nodes (C order) selecting nodes inside ``box``."""
        return box.contains(self.interior_points())

    def to_dict(self):
        return {"lower": list(self.box.lower), "upper": list(self.box.upper),
                "resolution": list(self.resolution)}

    @classmethod
    def from_dict(cls, d) -> "Grid":
        return cls(Box(tuple(d["lower"]), tuple(d["upper"])), tuple(d["resolution"]))


class GridFunction:
    """Scalar values on every node of ``grid``; boundary nodes are the box faces."""

    def __init__(self, grid: Grid, values):
        vals = np.array(values, dtype=float).reshape(grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        self.grid = grid
        self.values = vals

    @classmethod
    def from_callable(cls, grid: Grid, func: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return cls(grid, np.asarray(func(grid.points()), dtype=float).reshape(grid.shape))

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFunction":
        return cls(grid, np.zeros(grid.shape))

    @property
    def boundary_mask(self) -> np.ndarray:
        return self.grid.boundary_mask()

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.grid.interior_slice()].ravel()

    def boundary_values(self) -> np.ndarray:
        return self.values[self.boundary_mask]

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy())

    def _check(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise ValueError("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._check(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._check(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._check(other) - self.values)

    def __mul__(self, scalar):
        return GridFunction(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __repr__(self):
        return f"GridFunction(shape={self.grid.shape})"


# storage --------------------------------------------------------------------

def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float, hex_floats: bool) -> str:
    return float(x).hex() if hex_floats else repr(float(x))


def _parse_float(s: str) -> float:
    s = s.strip()
    return float.fromhex(s) if "0x" in s.lower() else float(s)


def write_grid_function(u: GridFunction, stem, hex_floats: bool = False, extra: dict | None = None) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` (coordinates + value per node) and ``<stem>.json`` (header)."""
    stem = Path(stem)
    names = [f"x{i + 1}" for i in range(u.grid.n)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names + ["value", "boundary"])
    pts = u.grid.points()
    bmask = u.boundary_mask.ravel()
    for p, v, b in zip(pts, u.values.ravel(), bmask):
        writer.writerow([_fmt(c, hex_floats) for c in p] + [_fmt(v, hex_floats), int(b)])
    header = {"format_version": FORMAT_VERSION, "grid": u.grid.to_dict(),
              "order": "C", "float_encoding": "hex" if hex_floats else "decimal",
              "columns": names + ["value", "boundary"]}
    if extra:
        header.update(extra)
    csv_path, json_path = stem.with_suffix(".csv"), stem.with_suffix(".json")
    atomic_write_text(csv_path, buf.getvalue())
    atomic_write_text(json_path, json.dumps(header, indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def read_grid_function(stem) -> GridFunction:
    stem = Path(stem)
    header = json.loads(stem.with_suffix(".json").read_text())
    grid = Grid.from_dict(header["grid"])
    with open(stem.with_suffix(".csv"), newline="") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    if len(body) != int(np.prod(grid.shape)):
        raise ValueError(f"{stem}.csv has {len(body)} rows, header expects {int(np.prod(grid.shape))}")
    values = np.array([_parse_float(r[grid.n]) for r in body])
    coords = np.array([[_parse_float(c) for c in r[: grid.n]] for r in body])
    if not np.allclose(coords, grid.points(), rtol=0, atol=1e-12 * (1 + np.abs(grid.points()).max())):
        raise ValueError(f"{stem}.csv node coordinates do not match the header grid")
    return GridFunction(grid, values.reshape(grid.shape))
