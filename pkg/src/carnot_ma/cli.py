"""Command-line front end.

    carnot-ma {solve,certify,compare,sweep,validate-frame} --spec FILE --out DIR
              [--seed N] [--set key=value]... [--hex]

Exit status is 0 on success, 2 when a pipeline ran but its certificate
failed (no convergence, verdict not true, no strict margin, invalid
frame) and 1 on usage or spec errors. Every failure also writes
``error.json`` into the output directory. Set ``CARNOT_MA_LOG`` to a
logging level name (``INFO``, ``DEBUG``) for progress on stderr.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .carnot import FrameError, builtin_frame, load_frame, validate_frame
from .comparison import (PerturbationParams, certify_strict_subsolution, first_strict_mu, gradient_bound,
                         perturb, strictness_sweep, verify_comparison)
from .grid import GridFunction, atomic_write_text, write_grid_function
from .horizontal import certify_convexity
from .plotdata import write_plot_data
from .solver import LinearSolverError, solve
from .specfile import ProblemSpec, SpecError, parse_spec

COMMANDS = ("solve", "certify", "compare", "sweep", "validate-frame")
EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2

log = logging.getLogger("carnot_ma")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    spec_path: str
    output_dir: Path
    seed: int = 0
    overrides: list = field(default_factory=list)
    hex_floats: bool = False


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="carnot-ma", description="Monge-Ampere type equations on Carnot groups.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--spec", required=True, help="spec file, built-in spec name or (validate-frame) frame file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a spec entry, e.g. solver.tol=1e-8 or resolution=17")
    p.add_argument("--hex", dest="hex_floats", action="store_true", help="write grids with hexadecimal floats")
    return p


# serialization ------------------------------------------------------------------

def _clean(obj):
    """JSON-ready copy with floats at 12 significant digits for stable reports."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return str(x)
        return float(format(x, ".12g"))
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dump_report(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


def _write_json(path, report):
    atomic_write_text(path, dump_report(report))


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write_text(path, buf.getvalue())


# pipelines ----------------------------------------------------------------------

def _base_report(cfg: RunConfig, spec: ProblemSpec | None = None) -> dict:
    out = {"command": cfg.command, "seed": cfg.seed, "overrides": list(cfg.overrides), "version": __version__}
    if spec is not None:
        pr = spec.problem
        out.update({"problem": pr.name, "spec": Path(spec.path).name, "settings": spec.settings,
                    "frame": pr.frame.name, "grid": pr.grid.to_dict(), "gamma_floor": pr.gamma_floor,
                    "hamiltonian": pr.hamiltonian.to_dict()})
    return out


def _solve(cfg: RunConfig, spec: ProblemSpec, report: dict, prefix: str = ""):
    state = solve(spec.problem, spec.solver)
    u = state.u
    exact = spec.problem.exact_solution()
    write_grid_function(u, cfg.output_dir / f"{prefix}solution", cfg.hex_floats, {"seed": cfg.seed})
    _write_csv(cfg.output_dir / f"{prefix}residual_log.csv",
               ["iteration", "max_residual", "rms_residual", "damping", "feasible", "infeasible_nodes"],
               [[e["iteration"], repr(e["max_residual"]), repr(e["rms_residual"]), repr(e["damping"]),
                 int(e["feasible"]), e["infeasible_nodes"]] for e in state.residual_log])
    write_plot_data(u, cfg.output_dir, prefix, exact)
    summary = {"converged": state.converged, "iterations": state.iterations, "message": state.message,
               "max_residual": state.max_residual,
               "fallback_nodes": state.policy.n_fallback if state.policy is not None else 0}
    if exact is not None:
        summary["max_error"] = float(np.abs(u.values - exact.values).max())
    report[f"{prefix}solve"] = summary
    return state


def run_solve(cfg, spec):
    report = _base_report(cfg, spec)
    state = _solve(cfg, spec, report)
    s = report["solve"]
    print(f"solve {spec.problem.name}: {s['message']}, {s['iterations']} iterations, "
          f"max residual {s['max_residual']:.3e}"
          + (f", max error {s['max_error']:.3e}" if "max_error" in s else ""))
    return report, EXIT_OK if state.converged else EXIT_FAILED


def run_certify(cfg, spec):
    report = _base_report(cfg, spec)
    state = _solve(cfg, spec, report)
    pr, opts = spec.problem, spec.certify
    sub = pr.grid.box.scaled(opts.subdomain)
    conv = certify_convexity(pr.frame, state.u, opts.gamma)
    gb = gradient_bound(pr.frame, state.u, sub)
    mu = opts.mu
    if mu is None:
        rows = strictness_sweep(pr, state.u, opts.epsilon, sub, spec.sweep.mus, spec.sweep.level)
        mu = first_strict_mu(rows)
    strict = None
    if mu is not None:
        strict = certify_strict_subsolution(pr, perturb(state.u, PerturbationParams(opts.epsilon, mu), pr.m),
                                            sub, spec.sweep.level)
    report["certify"] = {"convexity": conv.to_dict(), "gradient_bound": gb.to_dict(),
                         "strictness": strict.to_dict() if strict else None, "mu": mu,
                         "epsilon": opts.epsilon}
    ok = state.converged and conv.certified and strict is not None and strict.certified
    print(f"certify {pr.name}: convexity {conv.kind.value} (gamma {conv.gamma:.4g}), gradient bound "
          f"C = {gb.C:.4g}, strict margin "
          + (f"{strict.margin:.4g} at mu = {mu:g}" if strict is not None else "none"))
    return report, EXIT_OK if ok else EXIT_FAILED


def compare_pair(spec: ProblemSpec, u: GridFunction):
    """``(u_sub, v_super, extra)`` for the pair kind chosen in ``[compare]``."""
    pr, opts = spec.problem, spec.compare
    pts = pr.grid.points()
    kind, c = opts.pair, opts.amount
    if kind == "self":
        return u, u, {}
    if kind == "shift":
        return u - c, u, {}
    if kind == "boundary_shift":
        raised = spec.problem.with_boundary(pr.boundary_data.values + c)
        v = solve(raised, spec.solver)
        return u, v.u, {"super_converged": v.converged}
    width = opts.width
    if kind == "boundary_lower":
        width = 1.0 if width is None else width
        corner = pr.grid.box.upper
        psi = np.exp(-np.sum((pts - corner) ** 2, axis=1) / width**2).reshape(pr.grid.shape)
        lowered = spec.problem.with_boundary(pr.boundary_data.values - c * psi)
        w = solve(lowered, spec.solver)
        return w.u, u, {"sub_converged": w.converged}
    width = 0.3 if width is None else width
    bump = np.exp(-np.sum((pts - pr.grid.box.center) ** 2, axis=1) / width**2).reshape(pr.grid.shape)
    return GridFunction(pr.grid, u.values + c * bump), u, {}


def run_compare(cfg, spec):
    report = _base_report(cfg, spec)
    state = _solve(cfg, spec, report)
    u_sub, v_super, extra = compare_pair(spec, state.u)
    tol = spec.compare.tol or 10 * spec.solver.tol
    rep = verify_comparison(spec.problem, u_sub, v_super, tol)
    write_grid_function(u_sub, cfg.output_dir / "u_sub", cfg.hex_floats, {"seed": cfg.seed})
    write_grid_function(v_super, cfg.output_dir / "v_super", cfg.hex_floats, {"seed": cfg.seed})
    report["compare"] = {"pair": spec.compare.pair, "amount": spec.compare.amount, **extra, **rep.to_dict()}
    verdict = {True: "true", False: "false", None: "not claimed (preconditions failed)"}[rep.verdict]
    print(f"compare {spec.problem.name} [{spec.compare.pair}]: sup gap {rep.sup_gap:.4g}, "
          f"boundary gap {rep.boundary_gap:.4g}, verdict {verdict}")
    for d in rep.diagnostics:
        print(f"  precondition: {d}")
    return report, EXIT_OK if rep.verdict is True and state.converged else EXIT_FAILED


def run_sweep(cfg, spec):
    report = _base_report(cfg, spec)
    state = _solve(cfg, spec, report)
    opts = spec.sweep
    sub = spec.problem.grid.box.scaled(opts.subdomain)
    rows = strictness_sweep(spec.problem, state.u, opts.epsilon, sub, opts.mus, opts.level)
    _write_csv(cfg.output_dir / "sweep.csv", ["mu", "margin", "certified"],
               [[format(r["mu"], ".12g"), format(r["margin"], ".12g"), int(r["certified"])] for r in rows])
    mu_bar = first_strict_mu(rows)
    report["sweep"] = {"epsilon": opts.epsilon, "level": opts.level, "subdomain": opts.subdomain,
                       "rows": rows, "mu_bar": mu_bar}
    print(f"sweep {spec.problem.name}: eps = {opts.epsilon:g}, first strict mu = "
          + (f"{mu_bar:g}" if mu_bar is not None else "none"))
    for r in rows:
        print(f"  mu {r['mu']:8g}  margin {r['margin']: .4e}  {'ok' if r['certified'] else '-'}")
    return report, EXIT_OK if mu_bar is not None else EXIT_FAILED


def _frame_for(cfg: RunConfig):
    path = Path(cfg.spec_path)
    if path.is_file():
        cp = configparser.ConfigParser()
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise SpecError(f"cannot parse: {exc}", path) from None
        if cp.has_section("frame"):
            return load_frame(path, strict=False)
    else:
        try:
            return builtin_frame(cfg.spec_path)
        except KeyError:
            pass
    return parse_spec(cfg.spec_path, cfg.overrides, cfg.seed, validate=False).problem.frame


def run_validate_frame(cfg, _spec=None):
    frame = _frame_for(cfg)
    rep = validate_frame(frame, seed=cfg.seed)
    report = _base_report(cfg)
    report["frame"] = {"name": frame.name, "layers": list(frame.signature.layer_dims), **rep.to_dict()}
    print(f"validate-frame {frame.name}: {'passed' if rep.passed else 'FAILED'}")
    for c in rep.checks:
        print(f"  {c.name}: {'ok' if c.passed else 'fail'}  {c.detail}")
    return report, EXIT_OK if rep.passed else EXIT_FAILED


PIPELINES = {"solve": run_solve, "certify": run_certify, "compare": run_compare, "sweep": run_sweep,
             "validate-frame": run_validate_frame}


def run(cfg: RunConfig) -> int:
    """Execute one pipeline; writes ``report.json`` or ``error.json`` into the output directory."""
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    (cfg.output_dir / "error.json").unlink(missing_ok=True)
    try:
        spec = None
        if cfg.command != "validate-frame":
            spec = parse_spec(cfg.spec_path, cfg.overrides, cfg.seed)
        report, code = PIPELINES[cfg.command](cfg, spec)
    except (SpecError, FrameError) as exc:
        return _fail(cfg, exc, EXIT_USAGE)
    except (LinearSolverError, OverflowError, np.linalg.LinAlgError) as exc:
        return _fail(cfg, exc, EXIT_FAILED)
    report["exit_status"] = code
    _write_json(cfg.output_dir / "report.json", report)
    if code != EXIT_OK:
        _write_error(cfg.output_dir, cfg.command, cfg.seed, "CertificateFailure",
                     "pipeline finished but its certificate failed; see report.json", code)
    return code


def _fail(cfg: RunConfig, exc: Exception, code: int) -> int:
    extra = exc.to_dict() if hasattr(exc, "to_dict") else {}
    if isinstance(exc, LinearSolverError):
        extra = {"diagnostics": exc.diagnostics}
    _write_error(cfg.output_dir, cfg.command, cfg.seed, type(exc).__name__, str(exc), code, extra)
    print(f"error: {exc}", file=sys.stderr)
    return code


def _write_error(out_dir, command, seed, kind, message, code, extra=None):
    _write_json(Path(out_dir) / "error.json", {"command": command, "seed": seed, "error": kind,
                                                "message": message, "exit_status": code, **(extra or {})})


def _guess_out(argv):
    for i, a in enumerate(argv):
        if a == "--out" and i + 1 < len(argv):
            return argv[i + 1]
        if a.startswith("--out="):
            return a.split("=", 1)[1]
    return None


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    level = os.environ.get("CARNOT_MA_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        out = _guess_out(argv)
        if out:
            _write_error(out, None, None, "UsageError", str(exc), EXIT_USAGE)
        return EXIT_USAGE
    cfg = RunConfig(args.command, args.spec, Path(args.out), args.seed, args.overrides, args.hex_floats)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
