"""Homogeneous Carnot groups given by a triangular polynomial frame.

The generators are ``X_j = d/dx_j + sum_{i>m} sigma_ij(x) d/dx_i`` for
``j = 1..m``. Only the lower block ``sigma_ij`` (``i > m``) is stored; the
upper ``m x m`` block is the identity. Keys of ``sigma_polys`` use the
1-based ``(i, j)`` indexing of frame definition files; every array the
module returns is 0-based.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from itertools import accumulate
from pathlib import Path
from typing import Mapping

import numpy as np

from .polynomial import Polynomial


class FrameError(ValueError):
    """Raised when a frame violates the triangular/homogeneous structure."""

    def __init__(self, message: str, report: "FrameReport | None" = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class LayerSignature:
    layer_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if not dims or min(dims) < 1:
            raise ValueError(f"layer dimensions must be positive, got {self.layer_dims}")
        object.__setattr__(self, "layer_dims", dims)

    @property
    def n(self) -> int:
        return sum(self.layer_dims)

    @property
    def m(self) -> int:
        return self.layer_dims[0]

    @property
    def r(self) -> int:
        return len(self.layer_dims)

    @property
    def weights(self) -> np.ndarray:
        """Dilation weight of each coordinate (layer number, starting at 1)."""
        return np.repeat(np.arange(1, self.r + 1), self.layer_dims)

    def layer_slices(self) -> list[slice]:
        ends = list(accumulate(self.layer_dims))
        return [slice(e - d, e) for d, e in zip(self.layer_dims, ends)]


@dataclass(frozen=True)
class Dilation:
    lam: float
    signature: LayerSignature

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("dilation factor must be positive")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x * self.lam ** self.signature.weights

    def inverse(self) -> "Dilation":
        return Dilation(1.0 / self.lam, self.signature)


def group_dilate(d: Dilation, x) -> np.ndarray:
    return d(x)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    offenders: list = field(default_factory=list)

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "detail": self.detail,
                "offenders": [list(o) if isinstance(o, tuple) else o for o in self.offenders]}


@dataclass
class FrameReport:
    frame_name: str
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {"frame": self.frame_name, "passed": self.passed,
                "checks": [c.to_dict() for c in self.checks]}


class CarnotFrame:
    """Generator frame ``sigma(x)`` of a homogeneous Carnot group.

    With ``strict=True`` (default) the triangular and homogeneity checks
    run at construction and a :class:`FrameError` is raised on failure.
    ``strict=False`` defers everything to :func:`validate_frame`.
    """

    def __init__(self, signature: LayerSignature, sigma_polys: Mapping | None = None,
                 name: str = "frame", strict: bool = True):
        self.signature = signature
        self.name = name
        n, m = signature.n, signature.m
        polys: dict[tuple[int, int], Polynomial] = {}
        for (i, j), p in (sigma_polys or {}).items():
            if not (m < i <= n and 1 <= j <= m):
                raise FrameError(f"sigma_{i}_{j}: index outside m < i <= {n}, 1 <= j <= {m}")
            if isinstance(p, str):
                p = Polynomial.parse(p, n)
            if p.nvars != n:
                raise FrameError(f"sigma_{i}_{j} is a polynomial in {p.nvars} variables, expected {n}")
            if not p.is_zero():
                polys[(int(i), int(j))] = p
        self.sigma_polys = polys
        # derivative polynomials d sigma_ij / d x_l, keyed by 0-based (i, j, l)
        self._dpolys = {
            (i - 1, j - 1, l): dp
            for (i, j), p in polys.items()
            for l in range(n)
            if not (dp := p.diff(l)).is_zero()
        }
        if strict:
            structural = [_check_triangular(self), _check_homogeneous(self)]
            failed = [c for c in structural if not c.passed]
            if failed:
                report = FrameReport(name, structural)
                raise FrameError("; ".join(f"{c.name}: {c.detail}" for c in failed), report)

    @property
    def n(self) -> int:
        return self.signature.n

    @property
    def m(self) -> int:
        return self.signature.m

    def sigma(self, x) -> np.ndarray:
        """``sigma(x)`` as ``(n, m)``, or ``(N, n, m)`` for a batch of points."""
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        out = np.zeros((pts.shape[0], self.n, self.m))
        out[:, np.arange(self.m), np.arange(self.m)] = 1.0
        for (i, j), p in self.sigma_polys.items():
            out[:, i - 1, j - 1] = p(pts)
        return out[0] if single else out

    def sigma_jacobians(self, x) -> np.ndarray:
        """``D sigma^j(x)`` stacked as ``(m, n, n)``, or ``(N, m, n, n)`` for a batch.

        Entry ``[j, k, l]`` is ``d sigma_kj / d x_l``.
        """
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        out = np.zeros((pts.shape[0], self.m, self.n, self.n))
        for (i, j, l), dp in self._dpolys.items():
            out[:, j, i, l] = dp(pts)
        return out[0] if single else out

    def vector_fields(self) -> list[list[Polynomial]]:
        """The generators as coefficient lists ``[X_j^1, ..., X_j^n]``."""
        n = self.n
        fields = []
        for j in range(1, self.m + 1):
            coeffs = [Polynomial.constant(n, 1 if i == j else 0) for i in range(1, self.m + 1)]
            coeffs += [self.sigma_polys.get((i, j), Polynomial(n)) for i in range(self.m + 1, n + 1)]
            fields.append(coeffs)
        return fields

    def __repr__(self):
        return f"CarnotFrame({self.name!r}, layers={self.signature.layer_dims})"


def eval_sigma(frame: CarnotFrame, x) -> np.ndarray:
    return frame.sigma(x)


def eval_sigma_jacobians(frame: CarnotFrame, x) -> np.ndarray:
    return frame.sigma_jacobians(x)


def lie_bracket(X: list[Polynomial], Y: list[Polynomial]) -> list[Polynomial]:
    """``[X, Y]^k = X(Y^k) - Y(X^k)`` for polynomial vector fields."""
    n = len(X)
    out = []
    for k in range(n):
        c = Polynomial(n)
        for l in range(n):
            if not X[l].is_zero():
                c = c + X[l] * Y[k].diff(l)
            if not Y[l].is_zero():
                c = c - Y[l] * X[k].diff(l)
        out.append(c)
    return out


def _check_triangular(frame: CarnotFrame) -> CheckResult:
    bad = [(i, j) for (i, j), p in frame.sigma_polys.items() if any(v >= i - 1 for v in p.variables())]
    return CheckResult(
        "triangular", not bad,
        "ok" if not bad else "sigma_ij must depend only on x1..x(i-1)", bad)


def _check_homogeneous(frame: CarnotFrame) -> CheckResult:
    w = frame.signature.weights
    max_deg = frame.n - frame.m
    bad = []
    for (i, j), p in frame.sigma_polys.items():
        if p.weighted_degrees(w) != {w[i - 1] - 1} or p.degree() > max_deg:
            bad.append((i, j))
    detail = "ok" if not bad else (
        f"sigma_ij must be weight-homogeneous of degree w_i - 1 and degree <= {max_deg}")
    return CheckResult("homogeneous", not bad, detail, bad)


def sample_points(n: int, count: int = 8, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.vstack([np.zeros(n), rng.uniform(-1.0, 1.0, size=(count, n))])


def _check_rank(frame: CarnotFrame, points: np.ndarray) -> CheckResult:
    fields = frame.vector_fields()
    span = list(fields)
    level = list(fields)
    for _ in range(frame.signature.r - 1):
        level = [lie_bracket(X, Z) for X in fields for Z in level]
        level = [Z for Z in level if not all(c.is_zero() for c in Z)]
        span += level
    bad = []
    for pt in points:
        mat = np.array([[c(pt) for c in Z] for Z in span])
        if np.linalg.matrix_rank(mat, tol=1e-9) < frame.n:
            bad.append(tuple(float(v) for v in pt))
    detail = (f"commutators of length <= {frame.signature.r} span R^{frame.n} at {len(points)} points"
              if not bad else f"rank < {frame.n} at {len(bad)} of {len(points)} sample points")
    return CheckResult("hormander_rank", not bad, detail, bad)


def validate_frame(frame: CarnotFrame, n_samples: int = 8, seed: int = 0) -> FrameReport:
    """Triangularity, homogeneity and bracket-generating checks, as a report."""
    pts = sample_points(frame.n, n_samples, seed)
    return FrameReport(frame.name, [
        _check_triangular(frame),
        _check_homogeneous(frame),
        _check_rank(frame, pts),
    ])


# built-in frames ------------------------------------------------------------

def euclidean(n: int) -> CarnotFrame:
    return CarnotFrame(LayerSignature((n,)), {}, name=f"euclidean{n}")


def heisenberg(k: int = 1) -> CarnotFrame:
    """Heisenberg group H^k on R^(2k+1): X_j = d_j - x_(k+j)/2 d_t, X_(k+j) = d_(k+j) + x_j/2 d_t."""
    n = 2 * k + 1
    polys = {}
    for j in range(1, k + 1):
        polys[(n, j)] = Polynomial.variable(n, k + j - 1) * (-0.5)
        polys[(n, k + j)] = Polynomial.variable(n, j - 1) * 0.5
    return CarnotFrame(LayerSignature((2 * k, 1)), polys, name="heisenberg" if k == 1 else f"heisenberg{k}")


def engel() -> CarnotFrame:
    """Step-3 Engel group on R^4: X1 = d1, X2 = d2 + x1 d3 + x1^2/2 d4."""
    return CarnotFrame(LayerSignature((2, 1, 1)), {(3, 2): "x1", (4, 2): "x1^2/2"}, name="engel")


def builtin_frame(name: str) -> CarnotFrame:
    key = name.strip().lower()
    if key in ("heisenberg", "h1"):
        return heisenberg(1)
    if key.startswith("heisenberg") and key[10:].isdigit():
        return heisenberg(int(key[10:]))
    if key.startswith("euclidean") and key[9:].isdigit():
        return euclidean(int(key[9:]))
    if key == "engel":
        return engel()
    raise KeyError(f"unknown built-in frame {name!r}")


def load_frame(path, strict: bool = True) -> CarnotFrame:
    """Read a frame definition file (INI layout, see README)."""
    cfg = configparser.ConfigParser()
    with open(path) as fh:
        cfg.read_file(fh)
    if not cfg.has_section("frame"):
        raise FrameError(f"{path}: missing [frame] section")
    sec = cfg["frame"]
    try:
        dims = tuple(int(s) for s in sec["layers"].split(","))
    except (KeyError, ValueError):
        raise FrameError(f"{path}: 'layers' must be a comma-separated list of positive integers") from None
    sig = LayerSignature(dims)
    polys = {}
    for key, text in sec.items():
        if key.startswith("sigma_"):
            try:
                i, j = (int(t) for t in key[6:].split("_"))
            except ValueError:
                raise FrameError(f"{path}: bad key {key!r}, expected sigma_<i>_<j>") from None
            polys[(i, j)] = Polynomial.parse(text, sig.n)
    return CarnotFrame(sig, polys, name=sec.get("name", Path(path).stem), strict=strict)
