"""Problem specification files.

A spec is an INI file::

    [problem]
    name = heisenberg-gauss-manufactured
    frame = heisenberg            # built-in name or path to a frame file
    lower = -1                    # scalar or one value per axis
    upper = 1
    resolution = 33               # nodes per axis, scalar or list
    boundary = (x1^2 + x2^2)/2
    exact = (x1^2 + x2^2)/2       # optional
    gamma_floor = 1e-3

    [hamiltonian]
    kind = gauss_curvature
    k = (1 + x1^2 + x2^2)^(-2)

    [solver]
    tol = 1e-6

Optional sections ``[compare]``, ``[sweep]`` and ``[certify]`` configure
the matching CLI pipelines. Errors carry the offending line number.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .carnot import FrameError, builtin_frame, load_frame
from .comparison import MU_LADDER
from .expressions import Expression, ExpressionError, coordinate_names
from .grid import Box, Grid, GridFunction
from .hamiltonian import Hamiltonian, HamiltonianError
from .solver import DirichletProblem, SolverConfig

BUILTIN_SPECS = ("heisenberg-gauss-manufactured", "euclidean-quadratic")

_HAMILTONIAN_KEYS = {
    "gauss_curvature": ("k",),
    "power_of_gradient": ("f", "beta"),
    "constant_rhs": ("f",),
    "custom_expression": ("expression",),
}


class SpecError(ValueError):
    def __init__(self, message: str, path=None, line: int | None = None, key: str | None = None):
        where = f"{path}:{line}: " if path and line else (f"{path}: " if path else "")
        super().__init__(where + message)
        self.path, self.line, self.key, self.reason = path, line, key, message

    def to_dict(self):
        return {"path": str(self.path) if self.path else None, "line": self.line,
                "key": self.key, "reason": self.reason}


@dataclass
class CompareOptions:
    pair: str = "self"
    amount: float = 0.1
    width: float | None = None
    tol: float | None = None


@dataclass
class SweepOptions:
    epsilon: float = 0.1
    mus: tuple = MU_LADDER
    level: str = "det_power"
    subdomain: float = 0.5


@dataclass
class CertifyOptions:
    gamma: float = 0.0
    subdomain: float = 0.5
    epsilon: float = 0.1
    mu: float | None = None


@dataclass
class ProblemSpec:
    problem: DirichletProblem
    solver: SolverConfig
    compare: CompareOptions = field(default_factory=CompareOptions)
    sweep: SweepOptions = field(default_factory=SweepOptions)
    certify: CertifyOptions = field(default_factory=CertifyOptions)
    path: str | None = None
    seed: int = 0
    settings: dict = field(default_factory=dict)


def resolve_spec_path(spec) -> Path:
    """A file path, or the name of a built-in spec shipped with the package."""
    p = Path(spec)
    if p.exists():
        return p
    name = p.stem if p.suffix == ".ini" else str(spec)
    if name in BUILTIN_SPECS:
        return Path(str(resources.files("carnot_ma") / "data" / f"{name}.ini"))
    raise SpecError(f"no such spec file or built-in spec: {spec!r} (built-ins: {', '.join(BUILTIN_SPECS)})")


class _Source:
    """Parsed INI text that remembers where each key was written."""

    def __init__(self, text: str, path):
        self.path = path
        self.cfg = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            self.cfg.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise SpecError(f"cannot parse spec: {exc}".replace("\n", " "), path,
                            getattr(exc, "lineno", None)) from None
        self.lines = {}
        section = None
        for no, raw in enumerate(text.splitlines(), 1):
            s = raw.strip()
            if m := re.match(r"\[(.+)\]$", s):
                section = m.group(1).strip().lower()
            elif section and (m := re.match(r"([^=:\s#;][^=:]*?)\s*[=:]", s)):
                self.lines[(section, m.group(1).strip().lower())] = no
        self.overridden = set()

    def fail(self, section, key, message):
        line = None if (section, key) in self.overridden else self.lines.get((section, key))
        where = f"[{section}] {key}" if key else f"[{section}]"
        src = "override " if (section, key) in self.overridden else ""
        raise SpecError(f"{src}{where}: {message}", self.path, line, key)

    def has(self, section, key):
        return self.cfg.has_option(section, key)

    def get(self, section, key, default=None, required=False):
        if self.cfg.has_option(section, key):
            return self.cfg.get(section, key)
        if required:
            self.fail(section, None, f"missing required key {key!r}")
        return default

    def number(self, section, key, default=None, kind=float, required=False):
        raw = self.get(section, key, None, required)
        if raw is None:
            return default
        try:
            return kind(raw)
        except ValueError:
            self.fail(section, key, f"expected a {kind.__name__}, got {raw!r}")

    def vector(self, section, key, n, default=None, kind=float):
        raw = self.get(section, key, None, default is None)
        if raw is None:
            return np.full(n, default, dtype=kind)
        try:
            vals = [kind(t) for t in raw.split(",")]
        except ValueError:
            self.fail(section, key, f"expected a comma-separated list of numbers, got {raw!r}")
        if len(vals) == 1:
            vals = vals * n
        if len(vals) != n:
            self.fail(section, key, f"expected 1 or {n} values, got {len(vals)}")
        return np.array(vals, dtype=kind)

    def expression(self, section, key, variables, required=True):
        raw = self.get(section, key, None, required)
        if raw is None:
            return None
        try:
            return Expression(raw, variables)
        except ExpressionError as exc:
            self.fail(section, key, str(exc))


def _apply_overrides(src: _Source, overrides):
    for item in overrides:
        if "=" not in item:
            raise SpecError(f"override {item!r} must look like key=value or section.key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        if "." in key:
            section, key = key.split(".", 1)
        else:
            owners = [s for s in src.cfg.sections() if src.cfg.has_option(s, key)]
            section = owners[0] if len(owners) == 1 else "problem"
        section, key = section.lower(), key.lower()
        if not src.cfg.has_section(section):
            src.cfg.add_section(section)
        src.cfg.set(section, key, value)
        src.overridden.add((section, key))


def _frame(src: _Source, base: Path):
    name = src.get("problem", "frame", required=True)
    candidate = (base / name) if not Path(name).is_absolute() else Path(name)
    try:
        if candidate.suffix in (".ini", ".frame") or candidate.is_file():
            return load_frame(candidate, strict=True)
        return builtin_frame(name)
    except KeyError as exc:
        src.fail("problem", "frame", str(exc).strip("'\""))
    except (FrameError, OSError, ValueError) as exc:
        src.fail("problem", "frame", str(exc))


def _hamiltonian(src: _Source, n: int, m: int) -> Hamiltonian:
    if not src.cfg.has_section("hamiltonian"):
        src.fail("hamiltonian", None, "missing [hamiltonian] section")
    kind = src.get("hamiltonian", "kind", required=True).strip().lower()
    if kind not in _HAMILTONIAN_KEYS:
        src.fail("hamiltonian", "kind", f"unknown kind {kind!r}; expected one of {', '.join(_HAMILTONIAN_KEYS)}")
    xs = coordinate_names(n)
    if kind == "gauss_curvature":
        return Hamiltonian.gauss_curvature(src.expression("hamiltonian", "k", xs), n, m)
    if kind == "power_of_gradient":
        f = src.expression("hamiltonian", "f", xs)
        return Hamiltonian.power_of_gradient(f, src.number("hamiltonian", "beta", required=True), n, m)
    if kind == "constant_rhs":
        return Hamiltonian.constant_rhs(src.expression("hamiltonian", "f", xs), n, m)
    variables = xs + ["u"] + [f"q{j + 1}" for j in range(m)]
    return Hamiltonian.custom(src.expression("hamiltonian", "expression", variables), n, m)


def _options(src: _Source, section: str, cls):
    out = cls()
    if not src.cfg.has_section(section):
        return out
    known = {f.name for f in fields(cls)}
    for key in src.cfg.options(section):
        if key not in known:
            src.fail(section, key, f"unknown key; expected one of {', '.join(sorted(known))}")
    for f in fields(cls):
        if not src.has(section, f.name):
            continue
        if f.name == "mus":
            raw = src.get(section, "mus").strip()
            if raw != "ladder":
                setattr(out, "mus", tuple(src.vector(section, "mus", len(raw.split(",")))))
        elif f.name in ("pair", "level"):
            setattr(out, f.name, src.get(section, f.name).strip())
        else:
            setattr(out, f.name, src.number(section, f.name))
    return out


def parse_spec(spec, overrides=(), seed: int = 0, validate: bool = True) -> ProblemSpec:
    """Build a validated :class:`DirichletProblem` plus pipeline options from a spec file.

    ``overrides`` are ``key=value`` or ``section.key=value`` strings applied
    before validation. Validation checks the frame and samples positivity
    and monotonicity of H with ``seed``.
    """
    path = resolve_spec_path(spec)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecError(f"cannot read spec: {exc}", path) from None
    src = _Source(text, path)
    _apply_overrides(src, overrides)
    if not src.cfg.has_section("problem"):
        raise SpecError("missing [problem] section", path)

    frame = _frame(src, path.parent)
    n, m = frame.n, frame.m
    lower = src.vector("problem", "lower", n, -1.0)
    upper = src.vector("problem", "upper", n, 1.0)
    try:
        box = Box(lower, upper)
    except ValueError as exc:
        src.fail("problem", "upper", str(exc))
    resolution = src.vector("problem", "resolution", n, kind=int)
    try:
        grid = Grid(box, tuple(int(r) for r in resolution))
    except ValueError as exc:
        src.fail("problem", "resolution", str(exc))
    xs = coordinate_names(n)
    boundary = src.expression("problem", "boundary", xs)
    exact = src.expression("problem", "exact", xs, required=False)
    with np.errstate(all="ignore"):
        bvals = boundary.at_points(grid.points()).reshape(grid.shape)
    if not np.all(np.isfinite(bvals[grid.boundary_mask()])):
        src.fail("problem", "boundary", "boundary data must be finite on every boundary node")
    bvals = np.where(np.isfinite(bvals), bvals, 0.0)
    gamma_floor = src.number("problem", "gamma_floor", 1e-3)
    if not gamma_floor > 0:
        src.fail("problem", "gamma_floor", "gamma_floor must be positive")
    ham = _hamiltonian(src, n, m)
    problem = DirichletProblem(frame, grid, ham, GridFunction(grid, bvals), gamma_floor, exact,
                               src.get("problem", "name", path.stem))
    if validate:
        R = src.number("problem", "r", None)
        try:
            problem.validate(R=R, seed=seed)
        except HamiltonianError as exc:
            kind = ham.kind
            key = {"gauss_curvature": "k", "power_of_gradient": "f", "constant_rhs": "f"}.get(kind, "expression")
            src.fail("hamiltonian", key, str(exc))
        except ValueError as exc:
            src.fail("problem", "frame", str(exc))

    solver = SolverConfig(seed=seed)
    if src.cfg.has_section("solver"):
        known = {f.name for f in fields(SolverConfig)} - {"seed"}
        for key in src.cfg.options("solver"):
            if key not in known:
                src.fail("solver", key, f"unknown key; expected one of {', '.join(sorted(known))}")
            kind = int if key in ("max_iter", "max_halvings", "fallback_density") else float
            value = src.number("solver", key, kind=kind)
            if not value > 0:
                src.fail("solver", key, f"{key} must be positive")
            setattr(solver, key, value)

    out = ProblemSpec(problem, solver, _options(src, "compare", CompareOptions),
                      _options(src, "sweep", SweepOptions), _options(src, "certify", CertifyOptions),
                      str(path), seed)
    if out.compare.pair not in ("self", "shift", "boundary_shift", "boundary_lower", "bump"):
        src.fail("compare", "pair", f"unknown pair {out.compare.pair!r}; expected self, shift, "
                                    "boundary_shift, boundary_lower or bump")
    if out.sweep.level not in ("det_power", "log_level"):
        src.fail("sweep", "level", "level must be det_power or log_level")
    out.settings = {s: dict(src.cfg.items(s)) for s in sorted(src.cfg.sections())}
    return out
