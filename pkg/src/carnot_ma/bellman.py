"""Min-representation of ``log det`` over a control set, and related checks.

For symmetric ``A >= gamma I``::

    log det A = min { m log a - m + tr(A M) :
                      a > 0, 0 <= M <= I/gamma, det M = a^(-m) }

attained at ``M = A^{-1}``, ``a = det(A)^(1/m)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """Matrix outside the admissible cone ``A >= gamma I``."""

    def __init__(self, message: str, min_eigenvalue: float):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class ControlError(ValueError):
    pass


def _eig_tol(A: np.ndarray) -> float:
    return 1e-10 * max(1.0, float(np.linalg.norm(A, 2)))


@dataclass(frozen=True)
class BellmanControl:
    M: np.ndarray
    a: float

    @classmethod
    def from_matrix(cls, M) -> "BellmanControl":
        """Control for ``M``, with ``a`` fixed by ``det M = a^-m``."""
        M = np.asarray(M, dtype=float)
        m = M.shape[0]
        sign, logdet = np.linalg.slogdet(M)
        if sign <= 0:
            raise ControlError("control matrix must be positive definite")
        return cls(M, float(np.exp(-logdet / m)))

    @property
    def m(self) -> int:
        return self.M.shape[0]

    def check(self, gamma: float | None = None, rtol: float = 1e-10) -> None:
        M = self.M
        if M.ndim != 2 or M.shape[0] != M.shape[1] or not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1, np.abs(M).max())):
            raise ControlError("control matrix must be square and symmetric")
        if not self.a > 0:
            raise ControlError(f"control scalar a must be positive, got {self.a}")
        lam = np.linalg.eigvalsh(M)
        tol = _eig_tol(M)
        if lam[0] < -tol:
            raise ControlError(f"control matrix has negative eigenvalue {lam[0]:.3e}")
        if gamma is not None and lam[-1] > 1.0 / gamma + tol:
            raise ControlError(f"control matrix exceeds I/gamma: eigenvalue {lam[-1]:.6g} > {1 / gamma:.6g}")
        target = self.a ** (-self.m)
        # small eigenvalues carry relative error ~ eps * cond(M)
        cond = lam[-1] / lam[0] if lam[0] > 0 else np.inf
        rtol = max(rtol, 8 * self.m * np.finfo(float).eps * cond)
        if abs(np.prod(lam) - target) > rtol * abs(target):
            raise ControlError(f"det M = {np.prod(lam):.16g} but a^-m = {target:.16g}")

    def to_dict(self):
        return {"M": self.M.tolist(), "a": self.a}


def logdet_exact(A, gamma: float) -> tuple[float, BellmanControl]:
    """``log det A`` by Cholesky, plus the control attaining the minimum.

    Raises :class:`DomainError` unless ``A >= gamma I`` up to
    ``1e-10 * ||A||``.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    A = np.asarray(A, dtype=float)
    A = (A + A.T) / 2
    lam_min = float(np.linalg.eigvalsh(A)[0])
    if lam_min < gamma - _eig_tol(A):
        raise DomainError(f"A is not >= {gamma} I: smallest eigenvalue {lam_min:.6g}", lam_min)
    L = np.linalg.cholesky(A)
    value = 2.0 * float(np.sum(np.log(np.diag(L))))
    m = A.shape[0]
    Linv = np.linalg.inv(L)
    M = Linv.T @ Linv
    return value, BellmanControl((M + M.T) / 2, float(np.exp(value / m)))


def bellman_value(A, c: BellmanControl, gamma: float | None = None) -> float:
    """``m log a - m + tr(A M)``; the control is validated first."""
    c.check(gamma)
    A = np.asarray(A, dtype=float)
    if A.shape != c.M.shape:
        raise ControlError(f"matrix shape {A.shape} does not match control shape {c.M.shape}")
    m = c.m
    return m * np.log(c.a) - m + float(np.sum(A * c.M))


def _rotations(m: int, count: int, rng: np.random.Generator) -> list[np.ndarray]:
    if m == 1:
        return [np.eye(1)]
    if m == 2:
        out = []
        for t in np.arange(count) * np.pi / count:
            c, s = np.cos(t), np.sin(t)
            out.append(np.array([[c, -s], [s, c]]))
        return out
    out = [np.eye(m)]
    for _ in range(count - 1):
        q, r = np.linalg.qr(rng.standard_normal((m, m)))
        out.append(q * np.sign(np.diag(r)))
    return out


def control_grid(m: int, gamma: float, density: int, seed: int = 0,
                 span: float = 1e-4) -> list[BellmanControl]:
    """Deterministic family of feasible controls ``M = R diag(mu) R^T``.

    Eigenvalues run over a log-spaced ladder of ``density`` values in
    ``[span/gamma, 1/gamma]``; rotations are a uniform angle grid for
    ``m = 2`` and seeded QR samples for ``m >= 3``. Scaled identities
    ``I/gamma'`` for ``gamma' = gamma * 2^k`` are always included.
    """
    if density < 1:
        raise ValueError("density must be >= 1")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    rng = np.random.default_rng(seed)
    ladder = np.geomspace(span / gamma, 1.0 / gamma, density) if density > 1 else np.array([1.0 / gamma])
    controls = [BellmanControl(np.eye(m) / (gamma * 2.0**k), gamma * 2.0**k)
                for k in range(max(density, 1))]
    mus = np.array(np.meshgrid(*([ladder] * m), indexing="ij")).reshape(m, -1).T
    mus = mus[np.all(np.diff(mus, axis=1) <= 0, axis=1)]  # rotations cover orderings
    for R in _rotations(m, density, rng):
        for mu in mus:
            M = (R * mu) @ R.T
            M = (M + M.T) / 2
            controls.append(BellmanControl(M, float(np.exp(-np.sum(np.log(mu)) / m))))
    return controls


def best_control(A, controls: list[BellmanControl]) -> tuple[BellmanControl, float]:
    """Control in ``controls`` with the smallest Bellman value at ``A``."""
    A = np.asarray(A, dtype=float)
    Ms = np.stack([c.M for c in controls])
    la = np.array([c.m * np.log(c.a) - c.m for c in controls])
    vals = la + np.einsum("ij,kij->k", A, Ms)
    k = int(np.argmin(vals))
    return controls[k], float(vals[k])


@dataclass(frozen=True)
class DoublingPair:
    X: np.ndarray
    Y: np.ndarray
    epsilon: float


@dataclass
class DoublingReport:
    left_holds: bool
    right_holds: bool
    left_min_eigenvalue: float
    right_min_eigenvalue: float

    @property
    def member(self) -> bool:
        return self.left_holds and self.right_holds

    def __bool__(self):
        return self.member

    def to_dict(self):
        return {"member": self.member, "left_holds": self.left_holds, "right_holds": self.right_holds,
                "left_min_eigenvalue": self.left_min_eigenvalue,
                "right_min_eigenvalue": self.right_min_eigenvalue}


def check_doubling_membership(d: DoublingPair, tol: float = 1e-12) -> DoublingReport:
    """Test ``-(3/eps) I <= diag(X, -Y) <= (3/eps) [[I, -I], [-I, I]]``."""
    if d.epsilon <= 0:
        raise ValueError("epsilon must be positive")
    X = np.atleast_2d(np.asarray(d.X, dtype=float))
    Y = np.atleast_2d(np.asarray(d.Y, dtype=float))
    n = X.shape[0]
    c = 3.0 / d.epsilon
    I = np.eye(n)
    Z = np.zeros((n, n))
    middle = np.block([[X, Z], [Z, -Y]])
    left = middle + c * np.eye(2 * n)
    right = c * np.block([[I, -I], [-I, I]]) - middle
    lmin = float(np.linalg.eigvalsh(left)[0])
    rmin = float(np.linalg.eigvalsh(right)[0])
    scale = tol * max(1.0, c, float(np.abs(middle).max()))
    return DoublingReport(lmin >= -scale, rmin >= -scale, lmin, rmin)
