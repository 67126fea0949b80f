"""Strict-subsolution perturbations, gradient bounds and comparison reports.

Everything here certifies inequalities for concrete grid functions. A
failed comparison with satisfied preconditions is reported as a scheme
artifact; nothing in this module claims more than the computed numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .carnot import CarnotFrame
from .grid import Box, GridFunction
from .hamiltonian import Hamiltonian
from .horizontal import Convexity, certify_convexity, default_tol_eig, horizontal_jets, interior_node
from .solver import DirichletProblem

MU_LADDER = tuple(2.0**k for k in range(11))
EPSILON_LADDER = (1e-1, 1e-2, 1e-3, 1e-4)
_MAX_EXPONENT = np.log(1e300)


@dataclass(frozen=True)
class PerturbationParams:
    epsilon: float
    mu: float

    def __post_init__(self):
        if not (self.epsilon > 0 and self.mu > 0):
            raise ValueError(f"epsilon and mu must be positive, got {self.epsilon}, {self.mu}")


def perturb(u: GridFunction, params: PerturbationParams, m: int) -> GridFunction:
    """``u + eps * exp(mu * sum_{i<=m} x_i^2 / 2)`` at every node."""
    pts = u.grid.points()
    expo = params.mu * np.sum(pts[:, :m] ** 2, axis=1) / 2
    top = float(expo.max())
    if top > _MAX_EXPONENT:
        raise OverflowError(f"perturbation exponent reaches {top:.4g} > {_MAX_EXPONENT:.4g} on this box")
    return GridFunction(u.grid, u.values + params.epsilon * np.exp(expo).reshape(u.grid.shape))


# residual levels --------------------------------------------------------------

def _sub_jets(problem: DirichletProblem, u: GridFunction):
    p, S, _, _ = problem.frame_on_grid.jets(u)
    lam = np.linalg.eigvalsh(S)
    return p, lam


def level_residual(problem: DirichletProblem, u: GridFunction, level: str) -> tuple[np.ndarray, np.ndarray]:
    """Residual at ``level`` (``"log_level"`` or ``"det_power"``) and the min eigenvalue field.

    Nodes where ``D_X^2 u`` is not positive definite get ``+inf``.
    """
    p, lam = _sub_jets(problem, u)
    pts = problem.frame_on_grid.points
    r = u.interior_values
    pd = lam[:, 0] > 0
    out = np.full(lam.shape[0], np.inf)
    H = problem.hamiltonian
    if level == "log_level":
        out[pd] = -np.sum(np.log(lam[pd]), axis=1) + H.log(pts[pd], r[pd], p[pd])
    elif level == "det_power":
        out[pd] = -np.exp(np.mean(np.log(lam[pd]), axis=1)) + H.root(pts[pd], r[pd], p[pd])
    else:
        raise ValueError(f"unknown level {level!r}; use 'log_level' or 'det_power'")
    return out, lam[:, 0]


@dataclass
class StrictnessCertificate:
    level: str
    certified: bool
    margin: float
    subdomain: Box
    violating_node: tuple[int, ...] | None = None
    infeasible_nodes: list = field(default_factory=list)
    reason: str = ""

    def to_dict(self):
        return {"level": self.level, "certified": self.certified, "margin": self.margin,
                "subdomain": {"lower": list(self.subdomain.lower), "upper": list(self.subdomain.upper)},
                "violating_node": list(self.violating_node) if self.violating_node else None,
                "infeasible_nodes": [list(n) for n in self.infeasible_nodes[:20]],
                "reason": self.reason}


def certify_strict_subsolution(problem: DirichletProblem, u: GridFunction, subdomain: Box,
                               level: str = "det_power", min_margin: float = 1e-8) -> StrictnessCertificate:
    """Margin ``-max residual`` over interior nodes of ``subdomain``.

    Certified when the margin exceeds ``min_margin``, which keeps exact
    solutions (margin at rounding level) from passing as strict.
    """
    if not subdomain.strictly_inside(problem.grid.box):
        raise ValueError("subdomain closure must lie inside the open domain")
    res, lam = level_residual(problem, u, level)
    mask = problem.grid.interior_mask_in(subdomain)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ValueError("subdomain contains no interior nodes")
    tol = default_tol_eig(u)
    bad = idx[lam[idx] <= tol]
    if bad.size:
        nodes = [interior_node(problem.grid, k) for k in bad]
        return StrictnessCertificate(level, False, -np.inf, subdomain, nodes[0], nodes,
                                     "not uniformly X-convex on the subdomain")
    worst = idx[np.argmax(res[idx])]
    margin = -float(res[worst])
    if margin > min_margin:
        return StrictnessCertificate(level, True, margin, subdomain)
    return StrictnessCertificate(level, False, margin, subdomain, interior_node(problem.grid, worst),
                                 reason=f"margin {margin:.3e} does not exceed {min_margin:.0e}")


def strictness_sweep(problem: DirichletProblem, u: GridFunction, epsilon: float, subdomain: Box,
                     mus=MU_LADDER, level: str = "det_power") -> list[dict]:
    """Margins of ``perturb(u, (epsilon, mu))`` over a ladder of ``mu``."""
    rows = []
    for mu in mus:
        try:
            up = perturb(u, PerturbationParams(epsilon, mu), problem.m)
        except OverflowError as exc:
            rows.append({"mu": float(mu), "margin": float("-inf"), "certified": False, "reason": str(exc)})
            continue
        cert = certify_strict_subsolution(problem, up, subdomain, level)
        rows.append({"mu": float(mu), "margin": cert.margin, "certified": cert.certified,
                     "reason": cert.reason})
    return rows


def first_strict_mu(rows: list[dict]) -> float | None:
    for r in rows:
        if r["certified"]:
            return r["mu"]
    return None


# gradient bound -----------------------------------------------------------------

@dataclass
class GradientBoundReport:
    C: float
    subdomain: Box
    norms: np.ndarray
    convexity_certified: bool

    def to_dict(self):
        return {"C": self.C, "subdomain": {"lower": list(self.subdomain.lower), "upper": list(self.subdomain.upper)},
                "nodes": int(self.norms.size), "convexity_certified": self.convexity_certified}


def gradient_bound(frame: CarnotFrame, u: GridFunction, subdomain: Box) -> GradientBoundReport:
    """``C = max |sigma^T Du|`` over interior nodes inside ``subdomain``."""
    p, _, _, _ = horizontal_jets(frame, u)
    mask = u.grid.interior_mask_in(subdomain)
    if not mask.any():
        raise ValueError("subdomain contains no interior nodes")
    norms = np.linalg.norm(p[mask], axis=1)
    cert = certify_convexity(frame, u, region=subdomain)
    return GradientBoundReport(float(norms.max()), subdomain, norms, cert.kind is not Convexity.NOT_CERTIFIED)


# comparison ---------------------------------------------------------------------

@dataclass
class ComparisonReport:
    sup_gap: float
    boundary_gap: float
    tol: float
    verdict: bool | None
    sub_residuals: np.ndarray
    super_residuals: np.ndarray
    diagnostics: list[str] = field(default_factory=list)
    epsilon_ladder: list[dict] = field(default_factory=list)
    argmax_node: tuple[int, ...] | None = None
    mu_bar: float | None = None

    @property
    def preconditions_ok(self) -> bool:
        return not self.diagnostics

    def to_dict(self):
        def ext(a):
            finite = a[np.isfinite(a)]
            return {"min": float(finite.min()) if finite.size else None,
                    "max": float(finite.max()) if finite.size else None,
                    "nonfinite": int((~np.isfinite(a)).sum())}

        return {"sup_gap": self.sup_gap, "boundary_gap": self.boundary_gap, "tol": self.tol,
                "verdict": self.verdict, "preconditions_ok": self.preconditions_ok,
                "diagnostics": self.diagnostics,
                "argmax_node": list(self.argmax_node) if self.argmax_node else None,
                "sub_residuals": ext(self.sub_residuals), "super_residuals": ext(self.super_residuals),
                "mu_bar": self.mu_bar, "epsilon_ladder": self.epsilon_ladder}


def _gaps(u: GridFunction, v: GridFunction):
    diff = u.values - v.values
    inner = diff[u.grid.interior_slice()]
    k = int(np.argmax(inner))
    node = tuple(int(i) + 1 for i in np.unravel_index(k, inner.shape))
    return float(inner.max()), float(max(0.0, diff[u.grid.boundary_mask()].max())), node


def verify_comparison(problem: DirichletProblem, u_sub: GridFunction, v_super: GridFunction,
                      tol: float, tol_sub: float | None = None, tol_super: float | None = None,
                      subdomain: Box | None = None, epsilons=EPSILON_LADDER, mus=MU_LADDER) -> ComparisonReport:
    """Check ``sup_Omega(u - v) <= max_boundary (u - v)^+ + tol`` for a sub/super pair.

    Preconditions (recorded, never raised): ``u_sub`` is X-convex with
    log-level residual ``<= tol_sub`` and ``v_super`` has residual
    ``>= -tol_super`` wherever its horizontal Hessian is positive definite
    (elsewhere no X-convex test function touches from below). Both
    tolerances default to ``tol``. If they hold, the perturbation pipeline
    runs: ``mu_bar`` from the strictness sweep at ``epsilon = max(epsilons)``,
    then the gaps of ``perturb(u_sub, (eps, mu_bar))`` for each ``eps``.
    """
    tol_sub = tol if tol_sub is None else tol_sub
    tol_super = tol if tol_super is None else tol_super
    if u_sub.grid != problem.grid or v_super.grid != problem.grid:
        raise ValueError("grid functions must live on the problem grid")
    sub_res, _ = level_residual(problem, u_sub, "log_level")
    super_res, _ = level_residual(problem, v_super, "log_level")
    diagnostics = []
    conv = certify_convexity(problem.frame, u_sub)
    if not conv.certified:
        diagnostics.append(f"u_sub is not X-convex (node {conv.violating_node})")
    if np.any(sub_res > tol_sub):
        k = int(np.argmax(sub_res))
        diagnostics.append(f"u_sub violates the subsolution inequality by {sub_res[k]:.3e} "
                           f"at node {interior_node(problem.grid, k)}")
    finite = np.isfinite(super_res)
    if np.any(super_res[finite] < -tol_super):
        k = int(np.flatnonzero(finite)[np.argmin(super_res[finite])])
        diagnostics.append(f"v_super violates the supersolution inequality by {-super_res[k]:.3e} "
                           f"at node {interior_node(problem.grid, k)}")
    sup_gap, boundary_gap, node = _gaps(u_sub, v_super)
    report = ComparisonReport(sup_gap, boundary_gap, tol, None, sub_res, super_res, diagnostics,
                              argmax_node=node)
    if diagnostics:
        return report
    report.verdict = bool(sup_gap <= boundary_gap + tol)
    sub = subdomain or problem.grid.box.scaled(0.5)
    rows = strictness_sweep(problem, u_sub, max(epsilons), sub, mus, level="log_level")
    report.mu_bar = first_strict_mu(rows)
    if report.mu_bar is not None:
        for eps in epsilons:
            up = perturb(u_sub, PerturbationParams(eps, report.mu_bar), problem.m)
            cert = certify_strict_subsolution(problem, up, sub, "log_level")
            sg, bg, _ = _gaps(up, v_super)
            report.epsilon_ladder.append({"epsilon": eps, "mu": report.mu_bar, "strict_margin": cert.margin,
                                          "certified": cert.certified, "sup_gap": sg, "boundary_gap": bg})
    return report


# Hamiltonian constants --------------------------------------------------------------

@dataclass
class LipschitzReport:
    empirical: float
    analytic: float | None
    R: float
    samples: int

    def to_dict(self):
        return {"empirical_L_R": self.empirical, "analytic_estimate": self.analytic, "R": self.R,
                "samples": self.samples}


def _radial_gradient_bound(coef: float, beta: float, m: int, qmax: float) -> float:
    # d/d|q| of coef * (1 + |q|^2)^(beta / (2m))
    s = np.linspace(0.0, qmax, 4001)
    g = coef * (beta / m) * s * (1 + s * s) ** (beta / (2 * m) - 1)
    return float(g.max())


def lipschitz_h_check(h: Hamiltonian, R: float, samples: int, box: Box, seed: int = 0) -> LipschitzReport:
    """Empirical ``L_R`` for ``|H^(1/m)(x,r,q+q1) - H^(1/m)(x,r,q)| <= L_R |q1|``."""
    rng = np.random.default_rng(seed)
    x, r, q = h.sample(box, R, samples, seed)
    q1 = rng.standard_normal(q.shape)
    q1 *= rng.uniform(1e-3, 1.0, size=(samples, 1)) / np.linalg.norm(q1, axis=1, keepdims=True)
    quot = np.abs(h.root(x, r, q + q1) - h.root(x, r, q)) / np.linalg.norm(q1, axis=1)
    m = h.m
    analytic = None
    if h.kind in ("gauss_curvature", "power_of_gradient"):
        beta = m + 2 if h.kind == "gauss_curvature" else float(h.params["beta"])
        xs = rng.uniform(box.lower, box.upper, size=(samples, h.n))
        zero_q = np.zeros((samples, m))
        coef = float(np.max(h.root(xs, 0.0, zero_q)))
        analytic = _radial_gradient_bound(coef, beta, m, R + 1.0)
    elif h.kind == "constant_rhs":
        analytic = 0.0
    return LipschitzReport(float(quot.max()), analytic, R, samples)


def monotonicity_constant(h: Hamiltonian, R: float, samples: int, box: Box, seed: int = 0) -> float:
    """Sampled ``min (log H(x,r,q) - log H(x,s,q)) / (r - s)`` over ``-R <= s < r <= R``."""
    rng = np.random.default_rng(seed)
    x, r, q = h.sample(box, R, samples, seed)
    s = rng.uniform(-R, R, size=samples)
    lo, hi = np.minimum(r, s), np.maximum(r, s)
    keep = hi - lo > 1e-6
    quot = (h.log(x[keep], hi[keep], q[keep]) - h.log(x[keep], lo[keep], q[keep])) / (hi[keep] - lo[keep])
    return float(quot.min())
