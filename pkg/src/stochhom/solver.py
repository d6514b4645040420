"""Preconditioned CG for the periodic corrector systems.

The preconditioner is the scaled periodic Laplacian
``B = (1 + lam)/2 * A_lap + delta*I``.  It is diagonal in the 2D discrete
Fourier basis, so ``B^{-1} r`` costs two FFTs.  With ``delta = 0`` the
constant mode is projected out; all iterates stay mean-zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import assemble_laplacian
from .errors import InputError, NumericalError, ParameterError

__all__ = [
    "laplacian_eigenvalues",
    "Preconditioner",
    "SolveReport",
    "build_preconditioner",
    "apply_preconditioner",
    "pcg_solve",
    "extreme_generalized_eigs",
]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200


def laplacian_eigenvalues(n: int) -> np.ndarray:
    """Eigenvalues of the periodic five-point Laplacian on the rfft2 layout ``(n, n//2 + 1)``."""
    s1 = 4.0 * np.sin(np.pi * np.arange(n) / n) ** 2
    s2 = 4.0 * np.sin(np.pi * np.arange(n // 2 + 1) / n) ** 2
    return s1[:, None] + s2[None, :]


@dataclass(frozen=True, eq=False)
class Preconditioner:
    n: int
    lam: float
    delta: float = 0.0
    mode: str = "spectral"
    eigenvalues: np.ndarray | None = field(default=None, repr=False)
    _lu: object = field(default=None, repr=False)

    @property
    def scale(self) -> float:
        return 0.5 * (1.0 + self.lam)

    def matrix(self) -> sp.csr_matrix:
        """Assembled ``B`` (for checks; the solver never forms it)."""
        B = self.scale * assemble_laplacian(self.n)
        if self.delta:
            B = B + self.delta * sp.identity(self.n * self.n, format="csr")
        return B.tocsr()

    def apply(self, r: np.ndarray) -> np.ndarray:
        return apply_preconditioner(self, r)

    def apply_sqrt_inverse(self, r: np.ndarray) -> np.ndarray:
        """``B^{-1/2} r`` (zero on constants when ``delta = 0``)."""
        n = self.n
        rh = np.fft.rfft2(np.asarray(r, dtype=float).reshape(n, n))
        lam = self.eigenvalues
        with np.errstate(divide="ignore"):
            inv = np.where(lam > 0, 1.0 / np.sqrt(lam), 0.0)
        return np.fft.irfft2(rh * inv, s=(n, n)).ravel()


def build_preconditioner(n: int, lam: float, delta: float = 0.0, mode: str = "spectral") -> Preconditioner:
    if n < 2:
        raise ParameterError(f"grid size must be >= 2, got {n}")
    if not 0.0 < lam <= 1.0:
        raise ParameterError(f"lambda must lie in (0, 1], got {lam}")
    if delta < 0:
        raise ParameterError(f"delta must be >= 0, got {delta}")
    eig = 0.5 * (1.0 + lam) * laplacian_eigenvalues(n) + delta
    if 0.0 < delta < np.finfo(float).eps * eig.max():
        # B would be numerically singular; the projected delta = 0 path is the exact alternative
        raise ParameterError(f"delta={delta:.3e} is below machine precision relative to ||B||; use delta=0")
    eig.setflags(write=False)
    lu = None
    if mode == "factorized":
        B = 0.5 * (1.0 + lam) * assemble_laplacian(n) + delta * sp.identity(n * n, format="csr")
        if delta == 0:
            # pin dof 0; for mean-zero r its equation is implied by the others
            B = B[1:, 1:]
        lu = spla.splu(B.tocsc())
    elif mode != "spectral":
        raise ParameterError(f"unknown preconditioner mode {mode!r}")
    return Preconditioner(n, float(lam), float(delta), mode, eig, lu)


def apply_preconditioner(P: Preconditioner, r: np.ndarray) -> np.ndarray:
    n = P.n
    r = np.asarray(r, dtype=float)
    if r.shape != (n * n,):
        raise InputError(f"vector length {r.shape} does not match grid {n}x{n}")
    if P.mode == "factorized":
        if P.delta == 0:
            z = np.zeros(n * n)
            z[1:] = P._lu.solve(r[1:] - r.mean())
            return z - z.mean()
        return P._lu.solve(r)
    rh = np.fft.rfft2(r.reshape(n, n))
    if P.delta == 0:
        rh[0, 0] = 0.0
        eig = P.eigenvalues.copy()
        eig[0, 0] = 1.0
        rh /= eig
    else:
        rh /= P.eigenvalues
    return np.fft.irfft2(rh, s=(n, n)).ravel()


@dataclass
class SolveReport:
    iterations: int
    final_relative_residual: float
    converged: bool
    residual_history: list[float] = field(default_factory=list, repr=False)


def pcg_solve(A, P: Preconditioner, f: np.ndarray, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
    """Solve ``A u = f`` on the mean-zero subspace.

    Stops when ``||r_k||_{B^-1} / ||r_0||_{B^-1} <= tol``.  Returns ``(u, report)``;
    hitting ``max_iter`` is reported, not raised.
    """
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    f = np.asarray(f, dtype=float)
    fnorm = np.linalg.norm(f)
    if abs(f.sum()) > 1e-10 * max(fnorm, np.finfo(float).tiny) * np.sqrt(f.size):
        raise InputError(f"right-hand side is not compatible: <f, 1> = {f.sum():.3e}")
    u = np.zeros_like(f)
    if fnorm == 0.0:
        return u, SolveReport(0, 0.0, True, [0.0])
    r = f - f.mean()
    z = apply_preconditioner(P, r)
    rz = float(r @ z)
    if rz <= 0.0:
        raise NumericalError("preconditioner is not positive on the residual")
    norm0 = np.sqrt(rz)
    history = [1.0]
    p = z.copy()
    k = 0
    rel = 1.0
    while k < max_iter:
        q = A @ p
        pq = float(p @ q)
        if pq <= 0.0:
            raise NumericalError(f"non-positive curvature p.Ap = {pq:.3e} at iteration {k}")
        step = rz / pq
        u += step * p
        r -= step * q
        z = apply_preconditioner(P, r)
        rz_new = float(r @ z)
        k += 1
        rel = np.sqrt(max(rz_new, 0.0)) / norm0
        history.append(rel)
        if rel <= tol:
            break
        p = z + (rz_new / rz) * p
        rz = rz_new
    u -= u.mean()
    return u, SolveReport(k, float(rel), bool(rel <= tol), history)


def _mean_zero_basis(m: int) -> np.ndarray:
    return scipy.linalg.null_space(np.ones((1, m)))


def extreme_generalized_eigs(A, P: Preconditioner, dense_limit: int = 32):
    """Extreme eigenvalues of ``B^{-1} A`` on mean-zero vectors.

    Uses the symmetric form ``B^{-1/2} A B^{-1/2}``: dense for ``n <= dense_limit``,
    Lanczos (ARPACK) otherwise.  Returns ``(mu_min, mu_max)``.
    """
    n = P.n
    M = n * n
    if n <= dense_limit:
        cols = np.empty((M, M))
        eye = np.eye(M)
        for c in range(M):
            cols[:, c] = P.apply_sqrt_inverse(eye[:, c])
        S = cols.T @ (A @ cols)
        S = 0.5 * (S + S.T)
        mu = np.linalg.eigvalsh(S)
        # the constant mode is annihilated by B^{-1/2}; drop it
        mu = mu[1:]
        return float(mu[0]), float(mu[-1])

    def matvec(x):
        return P.apply_sqrt_inverse(A @ P.apply_sqrt_inverse(x))

    S = spla.LinearOperator((M, M), matvec=matvec, dtype=float)
    mu_max = spla.eigsh(S, k=1, which="LA", return_eigenvectors=False, tol=1e-10)[0]
    shift = 2.0 * mu_max

    def shifted(x):
        return matvec(x) + shift * x.mean()

    S2 = spla.LinearOperator((M, M), matvec=shifted, dtype=float)
    mu_min = spla.eigsh(S2, k=1, which="SA", return_eigenvectors=False, tol=1e-10)[0]
    return float(mu_min), float(mu_max)
