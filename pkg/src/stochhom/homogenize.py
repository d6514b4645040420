"""Corrector solves, homogenized matrices and the grid refinement study."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .assembly import assemble_rhs, assemble_total, cells_of
from .errors import ParameterError
from .field import CoefficientField, EnsembleParams, refine_field, sample_field
from .solver import DEFAULT_MAX_ITER, SolveReport, build_preconditioner, pcg_solve

__all__ = [
    "CorrectorPair",
    "HomogenizedMatrix",
    "solve_correctors",
    "homogenized_matrix",
    "energy_matrix",
    "homogenize",
    "prolongate",
    "RefinementLevel",
    "refinement_study",
    "default_refinement_rhs",
    "estimate_order",
]


@dataclass
class CorrectorPair:
    phi1: np.ndarray
    phi2: np.ndarray
    reports: tuple[SolveReport, SolveReport]

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.reports)

    def __getitem__(self, i):
        return (self.phi1, self.phi2)[i]


@dataclass
class HomogenizedMatrix:
    a11: float
    a12: float
    a21: float
    a22: float
    realization_index: int = 0
    iterations_total: int = 0
    iterations: tuple[int, int] = (0, 0)
    residuals: tuple[float, float] = (0.0, 0.0)
    converged: bool = True

    def as_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    @property
    def asymmetry(self) -> float:
        return abs(self.a12 - self.a21)

    def symmetric_part(self) -> np.ndarray:
        A = self.as_array()
        return 0.5 * (A + A.T)


def _lam(field, lam):
    if lam is not None:
        return float(lam)
    if isinstance(field, CoefficientField):
        return field.params.lam
    raise ParameterError("lambda must be given for a bare cell array")


def solve_correctors(field, lam=None, tol=1e-8, delta=0.0, max_iter=DEFAULT_MAX_ITER, precond=None, A=None):
    """Solve ``A phi_i = f_i`` for both directions with PCG."""
    lam = _lam(field, lam)
    cells = cells_of(field)
    if A is None:
        A = assemble_total(cells, lam)
    if precond is None:
        precond = build_preconditioner(cells.shape[0], lam, delta)
    sols, reports = [], []
    for i in (1, 2):
        u, rep = pcg_solve(A, precond, assemble_rhs(cells, lam, i), tol, max_iter)
        sols.append(u)
        reports.append(rep)
    return CorrectorPair(sols[0], sols[1], tuple(reports))


def _cell_gradients(phi: np.ndarray, n: int):
    """Edge differences of a grid function per cell.

    Returns ``(d1_lo, d1_hi, d2_lo, d2_hi)``: differences along x1 on the two
    x1-edges of each cell and along x2 on its two x2-edges (units of phi).
    """
    u = phi.reshape(n, n)
    up1 = np.roll(u, -1, axis=0)
    d1 = up1 - u  # along x1 on the edge at height j
    d2 = np.roll(u, -1, axis=1) - u  # along x2 on the edge at x1-position i
    return d1, np.roll(d1, -1, axis=1), d2, np.roll(d2, -1, axis=0)


def _cell_coefficient(cells: np.ndarray, lam: float) -> np.ndarray:
    return lam + (1.0 - lam) * cells.astype(float)


def homogenized_matrix(field, correctors: CorrectorPair, lam=None) -> HomogenizedMatrix:
    """Flux averages ``a_ij = int a (e_i + grad phi_i) . e_j`` over the unit torus.

    Gradients are integrated exactly per cell (midpoint in the transverse
    direction), the same rule that produced the load vectors.
    """
    lam = _lam(field, lam)
    cells = cells_of(field)
    n = cells.shape[0]
    a_cell = _cell_coefficient(cells, lam)
    if isinstance(field, CoefficientField):
        from .field import coefficient_on_grid

        mean_a = float(coefficient_on_grid(field, lam).mean())
    else:
        mean_a = float(a_cell.mean())
    h = 1.0 / n
    entries = np.empty((2, 2))
    for i, phi in enumerate((correctors.phi1, correctors.phi2)):
        d1_lo, d1_hi, d2_lo, d2_hi = _cell_gradients(phi, n)
        # int_cell d(phi)/dx1 = h * mean of the two edge differences
        g1 = 0.5 * h * (d1_lo + d1_hi)
        g2 = 0.5 * h * (d2_lo + d2_hi)
        entries[i, 0] = float(np.sum(a_cell * g1)) + (mean_a if i == 0 else 0.0)
        entries[i, 1] = float(np.sum(a_cell * g2)) + (mean_a if i == 1 else 0.0)
    reps = correctors.reports
    return HomogenizedMatrix(
        entries[0, 0],
        entries[0, 1],
        entries[1, 0],
        entries[1, 1],
        realization_index=getattr(field, "realization_index", 0),
        iterations_total=reps[0].iterations + reps[1].iterations,
        iterations=(reps[0].iterations, reps[1].iterations),
        residuals=(reps[0].final_relative_residual, reps[1].final_relative_residual),
        converged=correctors.converged,
    )


def energy_matrix(field, correctors: CorrectorPair, lam=None) -> np.ndarray:
    """``int (e_j + grad phi_j) . a (e_i + grad phi_i)`` with the stiffness quadrature.

    Each gradient component is sampled on the two cell edges along which it is
    constant and the edges are weighted 1/2 (the lumped transverse mass).
    """
    lam = _lam(field, lam)
    cells = cells_of(field)
    n = cells.shape[0]
    a_cell = _cell_coefficient(cells, lam)
    h = 1.0 / n
    grads = []
    for i, phi in enumerate((correctors.phi1, correctors.phi2)):
        d1_lo, d1_hi, d2_lo, d2_hi = _cell_gradients(phi, n)
        e1 = 1.0 if i == 0 else 0.0
        e2 = 1.0 - e1
        grads.append((e1 + d1_lo / h, e1 + d1_hi / h, e2 + d2_lo / h, e2 + d2_hi / h))
    E = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            gi, gj = grads[i], grads[j]
            local = 0.5 * (gi[0] * gj[0] + gi[1] * gj[1]) + 0.5 * (gi[2] * gj[2] + gi[3] * gj[3])
            E[i, j] = float(np.sum(a_cell * local)) * h * h
    return E


def homogenize(field: CoefficientField, lam=None, tol=None, delta=0.0, max_iter=DEFAULT_MAX_ITER, precond=None):
    """Assemble, solve both correctors and return the realization's ``HomogenizedMatrix``."""
    lam = _lam(field, lam)
    if tol is None:
        tol = field.params.tol if isinstance(field, CoefficientField) else 1e-8
    correctors = solve_correctors(field, lam, tol, delta, max_iter, precond)
    return homogenized_matrix(field, correctors, lam)


# --- refinement study ---------------------------------------------------------


def default_refinement_rhs(x1, x2):
    return np.sin(2 * np.pi * x1) * np.cos(6 * np.pi * x2)


def prolongate(u: np.ndarray, n: int) -> np.ndarray:
    """Bilinear interpolation of a periodic ``n x n`` grid function onto ``2n x 2n``."""
    c = u.reshape(n, n)
    c1 = np.roll(c, -1, axis=0)
    c2 = np.roll(c, -1, axis=1)
    c12 = np.roll(c1, -1, axis=1)
    fine = np.empty((2 * n, 2 * n))
    fine[0::2, 0::2] = c
    fine[1::2, 0::2] = 0.5 * (c + c1)
    fine[0::2, 1::2] = 0.5 * (c + c2)
    fine[1::2, 1::2] = 0.25 * (c + c1 + c2 + c12)
    return fine.ravel()


@dataclass
class RefinementLevel:
    n_coarse: int
    n_fine: int
    rel_diff: float
    iterations: int


@dataclass
class RefinementResult:
    levels: list[RefinementLevel]
    solutions: dict = dc_field(default_factory=dict, repr=False)

    @property
    def differences(self) -> np.ndarray:
        return np.array([lv.rel_diff for lv in self.levels])

    @property
    def decay_factors(self) -> np.ndarray:
        d = self.differences
        return d[:-1] / d[1:]


def refinement_study(
    L: int,
    lam: float,
    alpha,
    seed: int,
    grid_list,
    rhs: Callable | None = None,
    tol: float = 1e-11,
    index: int = 1,
    keep_solutions: bool = False,
) -> RefinementResult:
    """Solve one fixed configuration on nested grids and compare successive solutions.

    ``grid_list`` holds vertex counts per side, each twice the previous.  The
    coarse solution is bilinearly injected into the next grid and
    ``||u_p - u_{p-1}|| / ||u_{p-1}||`` is reported on the finer grid.
    """
    grids = [int(g) for g in grid_list]
    if len(grids) < 2:
        raise ParameterError("refinement study needs at least two grids")
    for a, b in zip(grids, grids[1:]):
        if b != 2 * a:
            raise ParameterError(f"grids must be dyadically nested, got {a} -> {b}")
    if grids[0] % L:
        raise ParameterError(f"coarsest grid {grids[0]} is not a multiple of L={L}")
    rhs = default_refinement_rhs if rhs is None else rhs
    base = EnsembleParams(L, grids[0] // L, alpha, lam)
    field = sample_field(base, seed, index)
    result = RefinementResult([])
    prev = None
    for level, n in enumerate(grids):
        F = refine_field(field, 2 ** level)
        x = np.arange(n) / n
        f = (rhs(x[:, None], x[None, :]) / (n * n)).ravel()
        f -= f.mean()
        A = assemble_total(F, lam)
        u, rep = pcg_solve(A, build_preconditioner(n, lam), f, tol, max_iter=2000)
        if keep_solutions:
            result.solutions[n] = u
        if prev is not None:
            coarse = prolongate(prev, n // 2)
            diff = np.linalg.norm(u - coarse) / np.linalg.norm(coarse)
            result.levels.append(RefinementLevel(n // 2, n, float(diff), rep.iterations))
        prev = u
    return result


def estimate_order(result: RefinementResult) -> float:
    """Least-squares slope of ``log(diff)`` against ``log(h)`` (the exponent beta)."""
    h = np.array([1.0 / lv.n_fine for lv in result.levels])
    slope, _ = np.polyfit(np.log(h), np.log(result.differences), 1)
    return float(slope)
