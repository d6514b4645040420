"""Stiffness matrices and right-hand sides for the periodic corrector problem.

Bilinear elements on the ``n x n`` torus grid with the mass matrices lumped
in the transverse direction, so each cell contributes

    Q (x) I_hat + I_hat (x) Q,   Q = [[1, -1], [-1, 1]],   I_hat = diag(1/2, 1/2)

(positive semidefinite sign convention).  With this scaling the full-coverage
stochastic part equals the periodic five-point Laplacian ``A_lap`` exactly,
and ``A = lam*A_lap + (1 - lam)*A_s``.
"""

from __future__ import annotations

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import ParameterError
from .field import CoefficientField

__all__ = [
    "periodic_stiffness_1d",
    "assemble_laplacian",
    "assemble_stochastic",
    "assemble_total",
    "assemble_rhs",
    "reference_assemble",
    "reference_rhs",
    "local_block",
    "cells_of",
    "export_matrix_market",
    "REFERENCE_MAX_N",
]

REFERENCE_MAX_N = 64

_Q = np.array([[1.0, -1.0], [-1.0, 1.0]])
_I_HAT = np.diag([0.5, 0.5])


def local_block() -> np.ndarray:
    """4x4 cell block ``Q (x) I_hat + I_hat (x) Q``; local dof ``2*a + b`` is corner ``(i+a, j+b)``."""
    return np.kron(_Q, _I_HAT) + np.kron(_I_HAT, _Q)


def cells_of(obj) -> np.ndarray:
    if isinstance(obj, CoefficientField):
        return obj.cell_indicator
    return np.asarray(obj, dtype=bool)


def periodic_stiffness_1d(n: int, coeff=None) -> sp.csr_matrix:
    """Periodic tridiagonal 1D stiffness ``tridiag(-a_k, a_k + a_{k+1}, -a_{k+1})``.

    ``coeff[k]`` is the coefficient on interval ``[k, k+1]``; unit by default.
    """
    a = np.ones(n) if coeff is None else np.asarray(coeff, dtype=float)
    k = np.arange(n)
    # interval k couples vertices k and k+1 (mod n)
    diag = a + np.roll(a, 1)
    rows = np.concatenate([k, k, (k + 1) % n])
    cols = np.concatenate([k, (k + 1) % n, k])
    vals = np.concatenate([diag, -a, -a])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def assemble_laplacian(n: int) -> sp.csr_matrix:
    """Periodic five-point Laplacian ``D (x) I + I (x) D`` (PSD convention)."""
    if n < 2:
        raise ParameterError(f"grid size must be >= 2, got {n}")
    d = periodic_stiffness_1d(n)
    eye = sp.identity(n, format="csr")
    A = sp.kron(d, eye, format="csr") + sp.kron(eye, d, format="csr")
    A.sum_duplicates()
    A.sort_indices()
    return A


def _kron_sum_over_cells(cells: np.ndarray, weights: np.ndarray | None = None) -> sp.csr_matrix:
    """Accumulate ``w_k * (Q_k (x) I_k + I_k (x) Q_k)`` over the listed cells."""
    n = cells.shape[0]
    ci, cj = np.nonzero(cells)
    block = local_block()
    la, lb = np.nonzero(block)  # the two anti-diagonal corners vanish after lumping
    vals = block[la, lb]
    # local dof 2*a + b  ->  vertex (i + a, j + b)
    ra, rb = la // 2, la % 2
    sa, sb = lb // 2, lb % 2
    rows = ((ci[:, None] + ra) % n) * n + (cj[:, None] + rb) % n
    cols = ((ci[:, None] + sa) % n) * n + (cj[:, None] + sb) % n
    data = np.broadcast_to(vals, rows.shape)
    if weights is not None:
        data = data * weights[ci, cj][:, None]
    A = sp.coo_matrix((data.ravel(), (rows.ravel(), cols.ravel())), shape=(n * n, n * n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def assemble_stochastic(field) -> sp.csr_matrix:
    """Stochastic part ``A_s``: Kronecker-product sum over the covered cells."""
    return _kron_sum_over_cells(cells_of(field))


def assemble_total(field, lam: float | None = None) -> sp.csr_matrix:
    """``lam*A_lap + (1 - lam)*A_s`` for one realization."""
    if lam is None:
        lam = field.params.lam
    lam = float(lam)
    if not 0.0 < lam <= 1.0:
        raise ParameterError(f"lambda must lie in (0, 1], got {lam}")
    cells = cells_of(field)
    A = lam * assemble_laplacian(cells.shape[0])
    if lam < 1.0 and cells.any():
        A = A + (1.0 - lam) * assemble_stochastic(cells)
    A = A.tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def assemble_rhs(field, lam: float | None = None, direction: int = 1) -> np.ndarray:
    """Load vector of the corrector problem in direction ``direction`` (1 or 2).

    ``f_mu = -(1 - lam) * sum_cells a_hat * int_cell d(psi_mu)/dx_i``; on a cell
    the integral is ``+-h/2`` (the derivative factor integrates to +-1, the
    transverse hat to ``h/2``), so ``f`` is a discrete divergence of ``a_hat e_i``.
    """
    if direction not in (1, 2):
        raise ParameterError(f"direction must be 1 or 2, got {direction}")
    if lam is None:
        lam = field.params.lam
    c = cells_of(field).astype(float)
    n = c.shape[0]
    axis = direction - 1
    # s[i, j]: covered cells having vertex (i, j) as their "lower" end along the axis,
    # summed over the two transverse neighbours
    s = c + np.roll(c, 1, axis=1 - axis)
    f = (1.0 - lam) * (0.5 / n) * (s - np.roll(s, 1, axis=axis))
    return f.ravel()


# --- element-loop oracle ------------------------------------------------------

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(2)
_GAUSS_X = 0.5 * (_GAUSS_X + 1.0)
_GAUSS_W = 0.5 * _GAUSS_W


def _hat(a, t):
    return 1.0 - t if a == 0 else t


def _dhat(a, t):
    return -1.0 if a == 0 else 1.0


def _reference_cell_matrix(h: float) -> np.ndarray:
    # Gauss along the derivative direction, trapezoid (the lumped mass) across it
    trap_x, trap_w = np.array([0.0, 1.0]), np.array([0.5, 0.5])
    K = np.zeros((4, 4))
    for p in range(4):
        pa, pb = divmod(p, 2)
        for q in range(4):
            qa, qb = divmod(q, 2)
            s = 0.0
            for t1, w1 in zip(_GAUSS_X, _GAUSS_W):
                for t2, w2 in zip(trap_x, trap_w):
                    gp = _dhat(pa, t1) / h * _hat(pb, t2)
                    gq = _dhat(qa, t1) / h * _hat(qb, t2)
                    s += w1 * w2 * gp * gq
            for t1, w1 in zip(trap_x, trap_w):
                for t2, w2 in zip(_GAUSS_X, _GAUSS_W):
                    gp = _hat(pa, t1) * _dhat(pb, t2) / h
                    gq = _hat(qa, t1) * _dhat(qb, t2) / h
                    s += w1 * w2 * gp * gq
            K[p, q] = s * h * h
    return K


def reference_assemble(field, lam: float | None = None) -> sp.csr_matrix:
    """Slow cell-by-cell assembly of the lumped bilinear form (test oracle)."""
    if lam is None:
        lam = field.params.lam
    cells = cells_of(field)
    n = cells.shape[0]
    if n > REFERENCE_MAX_N:
        raise ParameterError(f"reference assembler refuses n={n} > {REFERENCE_MAX_N}")
    K = _reference_cell_matrix(1.0 / n)
    A = np.zeros((n * n, n * n)) if n <= 32 else None
    triplets = ([], [], [])
    for i in range(n):
        for j in range(n):
            a_cell = lam + (1.0 - lam) * float(cells[i, j])
            dofs = [((i + pa) % n) * n + (j + pb) % n for pa in (0, 1) for pb in (0, 1)]
            for p in range(4):
                for q in range(4):
                    if A is not None:
                        A[dofs[p], dofs[q]] += a_cell * K[p, q]
                    else:
                        triplets[0].append(dofs[p])
                        triplets[1].append(dofs[q])
                        triplets[2].append(a_cell * K[p, q])
    if A is not None:
        return sp.csr_matrix(A)
    return sp.csr_matrix((triplets[2], (triplets[0], triplets[1])), shape=(n * n, n * n))


def reference_rhs(field, lam: float | None = None, direction: int = 1) -> np.ndarray:
    """``-(1 - lam) sum_cells a_hat int_cell d(psi_mu)/dx_i`` by per-cell Gauss quadrature."""
    if lam is None:
        lam = field.params.lam
    cells = cells_of(field)
    n = cells.shape[0]
    if n > REFERENCE_MAX_N:
        raise ParameterError(f"reference assembler refuses n={n} > {REFERENCE_MAX_N}")
    h = 1.0 / n
    f = np.zeros(n * n)
    for i in range(n):
        for j in range(n):
            if not cells[i, j]:
                continue
            for pa in (0, 1):
                for pb in (0, 1):
                    integral = 0.0
                    for t1, w1 in zip(_GAUSS_X, _GAUSS_W):
                        for t2, w2 in zip(_GAUSS_X, _GAUSS_W):
                            if direction == 1:
                                g = _dhat(pa, t1) / h * _hat(pb, t2)
                            else:
                                g = _hat(pa, t1) * _dhat(pb, t2) / h
                            integral += w1 * w2 * g
                    mu = ((i + pa) % n) * n + (j + pb) % n
                    f[mu] -= (1.0 - lam) * integral * h * h
    return f


def export_matrix_market(path, A, comment: str = "") -> None:
    """Write ``A`` in MatrixMarket coordinate format (symmetric storage)."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment, field="real", symmetry="symmetric")
