"""Dirichlet solver for  -det(D_X^2 u) + H(x, u, D_X u) = 0  on a box.

The equation is solved in log form, ``-log det(D_X^2 u) + log H = 0``,
by Howard (policy) iteration on the min-representation of ``log det``.
For a fixed control ``(M, a)`` at every node the update solves the
linear problem

    tr(M sigma^T D^2u sigma) = m - m log a + log H(x, u_k, D_X u_k) - tr(M Q(x, Du_k))

with the gradient-dependent terms frozen at the current iterate. With
``M = A^{-1}``, ``a = det(A)^(1/m)`` this is a Newton step for ``log det``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import pyamg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bellman import best_control, control_grid
from .carnot import CarnotFrame, validate_frame
from .grid import Grid, GridFunction
from .hamiltonian import Hamiltonian
from .horizontal import FrameOnGrid, default_tol_eig, interior_node

log = logging.getLogger(__name__)


class LinearSolverError(RuntimeError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass
class DirichletProblem:
    """``boundary_data`` supplies values on boundary nodes; interior values are ignored."""

    frame: CarnotFrame
    grid: Grid
    hamiltonian: Hamiltonian
    boundary_data: GridFunction
    gamma_floor: float = 1e-3
    exact: object = None
    name: str = "problem"

    def __post_init__(self):
        if not self.gamma_floor > 0:
            raise ValueError("gamma_floor must be positive")
        if self.frame.n != self.grid.n:
            raise ValueError(f"frame dimension {self.frame.n} does not match grid dimension {self.grid.n}")
        if self.boundary_data.grid != self.grid:
            raise ValueError("boundary data lives on a different grid")
        if not np.all(np.isfinite(self.boundary_data.boundary_values())):
            raise ValueError("boundary data must be finite")
        self._fog = None

    @property
    def m(self) -> int:
        return self.frame.m

    @property
    def frame_on_grid(self) -> FrameOnGrid:
        if self._fog is None:
            self._fog = FrameOnGrid(self.frame, self.grid)
        return self._fog

    def validate(self, R: float | None = None, seed: int = 0) -> "DirichletProblem":
        report = validate_frame(self.frame, seed=seed)
        if not report.passed:
            failed = [c for c in report.checks if not c.passed]
            raise ValueError("invalid frame: " + "; ".join(f"{c.name}: {c.detail}" for c in failed))
        if R is None:
            R = max(1.0, 2.0 * float(np.abs(self.boundary_data.boundary_values()).max()))
        self.hamiltonian.validate(self.grid.box, R=R, seed=seed)
        return self

    def with_boundary(self, values) -> "DirichletProblem":
        """Same problem with other boundary data (array over all nodes or GridFunction)."""
        g = values if isinstance(values, GridFunction) else GridFunction(self.grid, values)
        out = DirichletProblem(self.frame, self.grid, self.hamiltonian, g, self.gamma_floor,
                               self.exact, self.name)
        out._fog = self._fog
        return out

    def exact_solution(self) -> GridFunction | None:
        if self.exact is None:
            return None
        f = self.exact
        func = f.at_points if hasattr(f, "at_points") else f
        return GridFunction.from_callable(self.grid, func)

    def impose_boundary(self, u: GridFunction) -> GridFunction:
        vals = u.values.copy()
        mask = self.grid.boundary_mask()
        vals[mask] = self.boundary_data.values[mask]
        return GridFunction(self.grid, vals)


@dataclass
class SolverConfig:
    tol: float = 1e-6
    max_iter: int = 50
    max_halvings: int = 30
    linear_rtol: float = 1e-10
    cond_max: float = 1e12
    fallback_density: int = 4
    seed: int = 0


@dataclass
class ResidualField:
    values: np.ndarray
    infeasible: np.ndarray
    min_eigenvalue: np.ndarray
    grid: Grid

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    @property
    def feasible(self) -> bool:
        return not bool(self.infeasible.any())

    def infeasible_nodes(self) -> list[tuple[int, ...]]:
        return [interior_node(self.grid, k) for k in np.flatnonzero(self.infeasible)]


@dataclass
class PolicyField:
    M: np.ndarray
    a: np.ndarray
    fallback: np.ndarray

    @property
    def n_fallback(self) -> int:
        return int(self.fallback.sum())


@dataclass
class SolverState:
    u: GridFunction
    policy: PolicyField | None = None
    residual_log: list[dict] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    message: str = ""

    @property
    def max_residual(self) -> float:
        return self.residual_log[-1]["max_residual"] if self.residual_log else float("inf")


def _log_h(problem: DirichletProblem, u: GridFunction, p: np.ndarray) -> np.ndarray:
    fog = problem.frame_on_grid
    return problem.hamiltonian.log(fog.points, u.interior_values, p)


def residual(problem: DirichletProblem, u: GridFunction, tol_eig: float | None = None) -> ResidualField:
    """``-log det(D_X^2 u) + log H(x, u, D_X u)`` at interior nodes.

    Nodes with ``D_X^2 u`` not ``>= gamma_floor I`` are flagged in
    ``infeasible``; their value uses eigenvalues clipped at ``gamma_floor``.
    """
    p, S, _, _ = problem.frame_on_grid.jets(u)
    lam = np.linalg.eigvalsh(S)
    g = problem.gamma_floor
    tol = default_tol_eig(u) if tol_eig is None else tol_eig
    values = -np.sum(np.log(np.maximum(lam, g)), axis=1) + _log_h(problem, u, p)
    return ResidualField(values, lam[:, 0] < g - tol, lam[:, 0], problem.grid)


def policy_improve(problem: DirichletProblem, u: GridFunction, config: SolverConfig | None = None) -> PolicyField:
    """Analytic minimizer ``M = A^{-1}``, ``a = det(A)^(1/m)`` with ``A`` clipped to ``>= gamma_floor I``."""
    config = config or SolverConfig()
    _, S, _, _ = problem.frame_on_grid.jets(u)
    lam, V = np.linalg.eigh(S)
    lam = np.maximum(lam, problem.gamma_floor)
    M = np.einsum("nij,nj,nkj->nik", V, 1.0 / lam, V)
    a = np.exp(np.mean(np.log(lam), axis=1))
    fallback = lam[:, -1] / lam[:, 0] > config.cond_max
    if fallback.any():
        controls = control_grid(problem.m, problem.gamma_floor, config.fallback_density, seed=config.seed)
        for k in np.flatnonzero(fallback):
            A = np.einsum("ij,j,kj->ik", V[k], lam[k], V[k])
            c, _ = best_control(A, controls)
            M[k], a[k] = c.M, c.a
        log.info("policy_improve: control-grid fallback at %d nodes", int(fallback.sum()))
    return PolicyField((M + np.swapaxes(M, 1, 2)) / 2, a, fallback)


class _Stencil:
    """Interior-unknown indexing and second-difference offsets for one grid."""

    def __init__(self, grid: Grid):
        self.grid = grid
        n = grid.n
        self.index = -np.ones(grid.shape, dtype=np.int64)
        N = int(np.prod(grid.interior_shape))
        self.index[grid.interior_slice()] = np.arange(N).reshape(grid.interior_shape)
        self.nodes = np.argwhere(self.index >= 0)
        self.N = N
        h = grid.h
        # (offset, (k, l), weight): sum_kl B_kl D_kl u = sum over entries of weight * B_kl * u[node + offset]
        entries = []
        for k in range(n):
            e = np.zeros(n, dtype=int)
            e[k] = 1
            entries += [(tuple(e), (k, k), 1 / h[k] ** 2), (tuple(-e), (k, k), 1 / h[k] ** 2),
                        ((0,) * n, (k, k), -2 / h[k] ** 2)]
            for l in range(k + 1, n):
                w = 2 / (4 * h[k] * h[l])
                for sk, sl, sg in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
                    o = np.zeros(n, dtype=int)
                    o[k], o[l] = sk, sl
                    entries.append((tuple(o), (k, l), sg * w))
        self.offsets: dict[tuple, list] = {}
        for off, kl, w in entries:
            self.offsets.setdefault(off, []).append((kl, w))
        self.neighbors = {}
        for off in self.offsets:
            nb = self.nodes + np.array(off)
            self.neighbors[off] = (self.index[tuple(nb.T)], tuple(nb.T))

    def assemble(self, B: np.ndarray, g: np.ndarray):
        """Matrix on interior unknowns and the boundary contribution vector."""
        rows, cols, vals = [], [], []
        shift = np.zeros(self.N)
        ar = np.arange(self.N)
        for off, terms in self.offsets.items():
            coef = sum(w * B[:, k, l] for (k, l), w in terms)
            j, nb = self.neighbors[off]
            inside = j >= 0
            rows.append(ar[inside])
            cols.append(j[inside])
            vals.append(coef[inside])
            if not inside.all():
                shift[~inside] += coef[~inside] * g[tuple(c[~inside] for c in nb)]
        L = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(self.N, self.N))
        return L, shift


@lru_cache(maxsize=8)
def _stencil(grid: Grid) -> _Stencil:
    return _Stencil(grid)


def _linear_solve(L: sp.csr_matrix, rhs: np.ndarray, x0: np.ndarray, rtol: float) -> np.ndarray:
    """Solve ``L x = rhs`` to ``||rhs - L x|| <= rtol ||rhs||`` after Jacobi row scaling.

    Smoothed-aggregation AMG accelerated by GMRES, then BiCGSTAB with the
    same preconditioner, then (small systems only) a direct factorization.
    """
    d = 1.0 / np.abs(L.diagonal())
    A = (sp.diags(d) @ L).tocsr()
    b = d * rhs
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(rhs)
    r0 = b - A @ x0
    r0norm = float(np.linalg.norm(r0))
    if r0norm <= rtol * bnorm:
        return x0
    # correction solve: the target is relative to ||b||, not to the warm-start residual
    ctol = min(0.5, rtol * bnorm / r0norm)
    history: list[float] = []

    def rel(x):
        return float(np.linalg.norm(b - A @ x)) / bnorm

    try:
        ml = pyamg.smoothed_aggregation_solver(A, symmetry="nonsymmetric", max_coarse=500)
        dx = ml.solve(r0, tol=ctol, accel="gmres", maxiter=min(300, A.shape[0]), residuals=history)
        x = x0 + dx
        if rel(x) <= rtol:
            return x
        dx, _ = spla.bicgstab(A, r0, x0=dx, M=ml.aspreconditioner(), rtol=ctol, maxiter=1000)
        x = x0 + dx
        if rel(x) <= rtol:
            return x
    except Exception as exc:  # noqa: BLE001 - any AMG breakdown falls through to the direct path
        log.warning("AMG solve failed (%s)", exc)
        x = x0
    if A.shape[0] <= 30000:
        log.info("iterative relative residual %.2e > %.0e, using direct factorization", rel(x), rtol)
        x = spla.spsolve(A.tocsc(), b)
        if rel(x) <= max(rtol, 1e-12):
            return x
    raise LinearSolverError(
        f"linear solve did not reach relative residual {rtol:.0e} (got {rel(x):.2e})",
        {"unknowns": A.shape[0], "amg_iterations": len(history), "relative_residual": rel(x),
         "residual_history": history[-10:]})


def policy_solve(problem: DirichletProblem, policy: PolicyField, u_prev: GridFunction,
                 config: SolverConfig | None = None) -> GridFunction:
    """Linear solve for a fixed control field, gradient terms frozen at ``u_prev``."""
    config = config or SolverConfig()
    fog = problem.frame_on_grid
    st = _stencil(problem.grid)
    m = problem.m
    p, _, du, _ = fog.jets(u_prev)
    B = np.einsum("nki,nij,nlj->nkl", fog.sigma, policy.M, fog.sigma)
    rhs = m - m * np.log(policy.a) + _log_h(problem, u_prev, p)
    if fog.has_q:
        rhs = rhs - np.einsum("nij,nji->n", policy.M, fog.q(du))
    L, shift = st.assemble(B, problem.boundary_data.values)
    x = _linear_solve(L, rhs - shift, u_prev.interior_values, config.linear_rtol)
    vals = problem.boundary_data.values.copy()
    vals[problem.grid.interior_slice()] = x.reshape(problem.grid.interior_shape)
    return GridFunction(problem.grid, vals)


def initial_guess(problem: DirichletProblem, config: SolverConfig | None = None) -> GridFunction:
    """One policy step from the identity control, with H evaluated at ``u = 0``, ``q = 0``."""
    config = config or SolverConfig()
    N = int(np.prod(problem.grid.interior_shape))
    m = problem.m
    fog = problem.frame_on_grid
    B = np.einsum("nki,nli->nkl", fog.sigma, fog.sigma)
    rhs = m + problem.hamiltonian.log(fog.points, 0.0, np.zeros((N, m)))
    L, shift = _stencil(problem.grid).assemble(B, problem.boundary_data.values)
    x = _linear_solve(L, rhs - shift, np.zeros(N), config.linear_rtol)
    vals = problem.boundary_data.values.copy()
    vals[problem.grid.interior_slice()] = x.reshape(problem.grid.interior_shape)
    return GridFunction(problem.grid, vals)


def _rms(res: ResidualField) -> float:
    return float(np.sqrt(np.mean(res.values**2)))


def _log_entry(it: int, res: ResidualField, theta: float) -> dict:
    return {"iteration": it, "max_residual": res.max_abs, "rms_residual": _rms(res),
            "damping": theta, "feasible": res.feasible, "infeasible_nodes": int(res.infeasible.sum())}


def solve(problem: DirichletProblem, config: SolverConfig | None = None,
          u0: GridFunction | None = None) -> SolverState:
    """Damped Howard iteration; never raises on non-convergence (see ``state.converged``).

    While the iterate is infeasible, steps are accepted on a nonincreasing
    RMS residual of the clipped operator. From the first feasible iterate
    on, a step must keep every node feasible and must not increase the
    max residual; halving the step is the proximal blend with the previous
    iterate.
    """
    config = config or SolverConfig()
    u = problem.impose_boundary(u0) if u0 is not None else initial_guess(problem, config)
    res = residual(problem, u)
    state = SolverState(u)
    state.residual_log.append(_log_entry(0, res, 1.0))
    stalled = 0
    log.info("iter 0: max residual %.3e infeasible nodes %d", res.max_abs, res.infeasible.sum())
    for it in range(1, config.max_iter + 1):
        if res.feasible and res.max_abs < config.tol:
            break
        policy = policy_improve(problem, u, config)
        state.policy = policy
        step = policy_solve(problem, policy, u, config).values - u.values
        theta = 1.0
        accepted = None
        for _ in range(config.max_halvings + 1):
            trial = GridFunction(problem.grid, u.values + theta * step)
            tres = residual(problem, trial)
            if res.feasible:
                ok = tres.feasible and tres.max_abs <= res.max_abs
            else:
                ok = _rms(tres) <= _rms(res)
            if ok:
                accepted = (trial, tres)
                break
            theta /= 2
        if accepted is None:
            state.message = f"line search failed at iteration {it}"
            break
        stalled = stalled + 1 if accepted[1].max_abs > 0.999 * res.max_abs and res.feasible else 0
        u, res = accepted
        state.u, state.iterations = u, it
        state.residual_log.append(_log_entry(it, res, theta))
        log.info("iter %d: max residual %.3e damping %.3g infeasible nodes %d",
                 it, res.max_abs, theta, res.infeasible.sum())
        if stalled >= 3 and not res.max_abs < config.tol:
            state.message = f"stagnated at max residual {res.max_abs:.3e} (algebraic floor above tol)"
            break
    state.u = u
    state.converged = res.feasible and res.max_abs < config.tol
    if state.converged:
        state.message = "converged"
        state.policy = policy_improve(problem, u, config)
    elif not state.message:
        state.message = f"no convergence after {config.max_iter} iterations"
    return state
