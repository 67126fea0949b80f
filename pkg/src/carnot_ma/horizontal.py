"""Horizontal gradients and symmetrized horizontal Hessians of grid functions.

For smooth ``u`` the horizontal Hessian is
``sigma^T D^2u sigma + Q(x, Du)`` with
``Q_ij = ((D sigma^j) sigma^i + (D sigma^i) sigma^j) . Du / 2``; the
Euclidean derivatives come from second-order central differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .carnot import CarnotFrame
from .grid import Box, Grid, GridFunction


class PreconditionError(ValueError):
    pass


def _shift(values: np.ndarray, offset) -> np.ndarray:
    """Interior-shaped view of ``values`` displaced by ``offset`` lattice steps."""
    return values[tuple(slice(1 + o, r - 1 + o) for o, r in zip(offset, values.shape))]


def euclid_derivatives(u: GridFunction) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference ``Du`` ``(N, n)`` and ``D^2u`` ``(N, n, n)`` at all interior nodes."""
    n, h = u.grid.n, u.grid.h
    v = u.values
    N = int(np.prod(u.grid.interior_shape))
    du = np.empty((N, n))
    d2u = np.empty((N, n, n))
    center = _shift(v, [0] * n).ravel()
    for k in range(n):
        e = [0] * n
        e[k] = 1
        plus = _shift(v, e).ravel()
        minus = _shift(v, [-c for c in e]).ravel()
        du[:, k] = (plus - minus) / (2 * h[k])
        d2u[:, k, k] = (plus - 2 * center + minus) / h[k] ** 2
        for l in range(k + 1, n):
            corner = []
            for sk, sl in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                o = [0] * n
                o[k], o[l] = sk, sl
                corner.append(_shift(v, o).ravel())
            d2u[:, k, l] = d2u[:, l, k] = (corner[0] - corner[1] - corner[2] + corner[3]) / (4 * h[k] * h[l])
    return du, d2u


def _flat_index(grid: Grid, node) -> int:
    node = tuple(int(i) for i in node)
    if len(node) != grid.n:
        raise PreconditionError(f"node {node} has wrong dimension for a {grid.n}-d grid")
    if any(i <= 0 or i >= r - 1 for i, r in zip(node, grid.shape)):
        raise PreconditionError(f"node {node} is not an interior node of a grid of shape {grid.shape}")
    return int(np.ravel_multi_index(tuple(i - 1 for i in node), grid.interior_shape))


def euclid_jet(u: GridFunction, node) -> tuple[np.ndarray, np.ndarray]:
    """``(Du, D^2u)`` at one interior lattice node (multi-index into ``u.values``)."""
    k = _flat_index(u.grid, node)
    du, d2u = euclid_derivatives(u)
    return du[k], d2u[k]


def q_matrix(frame: CarnotFrame, x, p_euclid) -> np.ndarray:
    """Frame-curvature correction ``Q(x, p)``; accepts single points or batches."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p_euclid, dtype=float)
    single = x.ndim == 1
    x, p = np.atleast_2d(x), np.atleast_2d(p)
    sig = frame.sigma(x)
    jac = frame.sigma_jacobians(x)
    # W[N, j, i] = (D sigma^j . sigma^i) . p
    W = np.einsum("njkl,nli,nk->nji", jac, sig, p)
    Q = (W + np.swapaxes(W, 1, 2)) / 2
    return Q[0] if single else Q


@dataclass
class HorizontalJet:
    p: np.ndarray
    S: np.ndarray
    euclid_grad: np.ndarray
    euclid_hess: np.ndarray


class FrameOnGrid:
    """Frame data evaluated once at the interior nodes of a grid."""

    def __init__(self, frame: CarnotFrame, grid: Grid):
        if frame.n != grid.n:
            raise ValueError(f"frame acts on R^{frame.n} but the grid is {grid.n}-dimensional")
        self.frame = frame
        self.grid = grid
        self.points = grid.interior_points()
        self.sigma = frame.sigma(self.points)
        self.jac = frame.sigma_jacobians(self.points)
        # T[N, j, i, k] = (D sigma^j sigma^i)_k, symmetrized over (i, j)
        T = np.einsum("njkl,nli->njik", self.jac, self.sigma)
        self.qtensor = (T + np.swapaxes(T, 1, 2)) / 2
        self.has_q = bool(np.any(self.qtensor))

    def q(self, du: np.ndarray) -> np.ndarray:
        if not self.has_q:
            return np.zeros((du.shape[0], self.frame.m, self.frame.m))
        return np.einsum("njik,nk->nji", self.qtensor, du)

    def jets(self, u: GridFunction):
        """``(p, S, Du, D^2u)`` stacked over interior nodes."""
        if u.grid != self.grid:
            raise ValueError("grid function lives on a different grid")
        du, d2u = euclid_derivatives(u)
        p = np.einsum("nkj,nk->nj", self.sigma, du)
        S = np.einsum("nki,nkl,nlj->nij", self.sigma, d2u, self.sigma) + self.q(du)
        S = (S + np.swapaxes(S, 1, 2)) / 2
        return p, S, du, d2u


def horizontal_jets(frame: CarnotFrame, u: GridFunction):
    return FrameOnGrid(frame, u.grid).jets(u)


def horizontal_jet(frame: CarnotFrame, u: GridFunction, node) -> HorizontalJet:
    k = _flat_index(u.grid, node)
    du, d2u = euclid_jet(u, node)
    x = u.grid.interior_points()[k]
    sig = frame.sigma(x)
    S = sig.T @ d2u @ sig + q_matrix(frame, x, du)
    return HorizontalJet(sig.T @ du, (S + S.T) / 2, du, d2u)


class Convexity(str, Enum):
    NOT_CERTIFIED = "not_certified"
    X_CONVEX = "x_convex"
    UNIFORMLY_X_CONVEX = "uniformly_x_convex"


@dataclass
class ConvexityCertificate:
    kind: Convexity
    gamma: float
    min_eigen_field: np.ndarray
    tol_eig: float
    violating_node: tuple[int, ...] | None = None

    @property
    def certified(self) -> bool:
        return self.kind is not Convexity.NOT_CERTIFIED

    def to_dict(self):
        return {"kind": self.kind.value, "gamma": self.gamma, "tol_eig": self.tol_eig,
                "min_eigenvalue": float(np.min(self.min_eigen_field)),
                "violating_node": list(self.violating_node) if self.violating_node else None}


def default_tol_eig(u: GridFunction) -> float:
    return 1e-8 * (1 + float(np.abs(u.values).max())) / float(np.min(u.grid.h)) ** 2


def interior_node(grid: Grid, flat: int) -> tuple[int, ...]:
    """Multi-index into ``values`` of the ``flat``-th interior node."""
    return tuple(int(i) + 1 for i in np.unravel_index(flat, grid.interior_shape))


def certify_convexity(frame: CarnotFrame, u: GridFunction, gamma_request: float = 0.0,
                      tol_eig: float | None = None, region: Box | None = None) -> ConvexityCertificate:
    """Discrete (uniform) X-convexity from the horizontal Hessian at interior nodes.

    X-convex when the smallest eigenvalue is ``>= -tol_eig`` everywhere.
    Uniformly X-convex when it is also ``>= gamma_request`` and positive
    (beyond ``tol_eig`` when ``gamma_request`` is 0). ``region`` restricts the check to interior nodes inside a sub-box;
    ``min_eigen_field`` still covers every interior node.
    """
    if gamma_request < 0:
        raise ValueError("gamma_request must be nonnegative")
    tol = default_tol_eig(u) if tol_eig is None else float(tol_eig)
    _, S, _, _ = horizontal_jets(frame, u)
    lam = np.linalg.eigvalsh(S)[:, 0]
    mask = np.ones(lam.shape, bool) if region is None else u.grid.interior_mask_in(region)
    if not mask.any():
        raise ValueError("region contains no interior nodes")
    idx = np.flatnonzero(mask)
    worst = idx[np.argmin(lam[idx])]
    lo = float(lam[worst])
    if lo < -tol:
        return ConvexityCertificate(Convexity.NOT_CERTIFIED, 0.0, lam, tol, interior_node(u.grid, worst))
    gamma = max(0.0, lo)
    # an explicit positive request is compared directly; tol only settles sign questions
    if lo > 0 and lo >= gamma_request and (gamma_request > 0 or lo > tol):
        return ConvexityCertificate(Convexity.UNIFORMLY_X_CONVEX, gamma, lam, tol)
    return ConvexityCertificate(Convexity.X_CONVEX, gamma, lam, tol)
