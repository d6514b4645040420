"""Dense spectra and Gaussian-broadened density of states."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import assemble_laplacian, assemble_total
from .errors import ParameterError

__all__ = [
    "DENSE_LIMIT",
    "DosCurve",
    "dense_eigenvalues",
    "default_eta",
    "dos_grid",
    "dos_curve",
    "homogenized_operator",
    "clustering_report",
    "curve_distance",
]

DENSE_LIMIT = 4096
DEFAULT_POINTS = 1024


@dataclass(frozen=True, eq=False)
class DosCurve:
    t_grid: np.ndarray
    values: np.ndarray
    eta: float
    m: int

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.t_grid))


def dense_eigenvalues(A) -> np.ndarray:
    """All eigenvalues of the symmetric operator ``A``, ascending."""
    dim = A.shape[0]
    if dim > DENSE_LIMIT:
        raise ParameterError(f"dense eigensolver refuses dimension {dim} > {DENSE_LIMIT}")
    dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    return np.linalg.eigvalsh(dense)


def default_eta(eigs) -> float:
    """2% of the spectral width."""
    eigs = np.asarray(eigs)
    return 0.02 * float(eigs.max() - eigs.min())


def dos_grid(lo: float, hi: float, eta: float, points: int = DEFAULT_POINTS) -> np.ndarray:
    """Uniform grid over ``[lo - 6*eta, hi + 6*eta]``."""
    return np.linspace(lo - 6.0 * eta, hi + 6.0 * eta, points)


def dos_curve(eigs, eta: float | None = None, t_points=None) -> DosCurve:
    """``phi(t) = (1/m) sum_j g_eta(t - lambda_j)`` with unit-mass Gaussians.

    ``t_points`` is either an array of sample points or a point count for the
    default grid extended by ``6*eta`` beyond the spectrum.
    """
    eigs = np.sort(np.asarray(eigs, dtype=float))
    if eta is None:
        eta = default_eta(eigs)
    if not eta > 0:
        raise ParameterError(f"broadening width must be positive, got {eta}")
    if t_points is None or np.isscalar(t_points):
        npts = DEFAULT_POINTS if t_points is None else int(t_points)
        t = dos_grid(eigs[0], eigs[-1], eta, npts)
    else:
        t = np.asarray(t_points, dtype=float)
    norm = 1.0 / (np.sqrt(2.0 * np.pi) * eta * len(eigs))
    values = np.zeros_like(t)
    # chunk over eigenvalues to keep the (points x eigs) block bounded
    for start in range(0, len(eigs), 512):
        chunk = eigs[start:start + 512]
        values += np.exp(-0.5 * ((t[:, None] - chunk[None, :]) / eta) ** 2).sum(axis=1)
    return DosCurve(t, values * norm, float(eta), len(eigs))


def homogenized_operator(n: int, a_hom) -> sp.csr_matrix:
    """Constant-coefficient operator for a diagonal effective matrix ``diag(a11, a22)``.

    A scalar ``a_hom`` gives ``a_hom * A_lap``.
    """
    a = np.atleast_1d(np.asarray(a_hom, dtype=float))
    if a.size == 1:
        return (a[0] * assemble_laplacian(n)).tocsr()
    A = np.asarray(a_hom, dtype=float).reshape(2, 2)
    from .assembly import periodic_stiffness_1d

    d = periodic_stiffness_1d(n)
    eye = sp.identity(n, format="csr")
    return (A[0, 0] * sp.kron(d, eye) + A[1, 1] * sp.kron(eye, d)).tocsr()


def curve_distance(t, u, v) -> float:
    """L2 distance of two curves sampled on the same grid."""
    return float(np.sqrt(np.trapezoid((np.asarray(u) - np.asarray(v)) ** 2, t)))


def clustering_report(fields, lam: float, eta: float | None = None, points: int = DEFAULT_POINTS, a_hom=None) -> dict:
    """DOS of several realizations on a shared grid, their average and scatter.

    If ``a_hom`` is given the DOS of the matching constant-coefficient operator
    is included together with its L2 distance to the sample average.
    """
    spectra = [dense_eigenvalues(assemble_total(F, lam)) for F in fields]
    lo = min(s[0] for s in spectra)
    hi = max(s[-1] for s in spectra)
    if eta is None:
        eta = 0.02 * (hi - lo)
    t = dos_grid(lo, hi, eta, points)
    curves = np.array([dos_curve(s, eta, t).values for s in spectra])
    avg = curves.mean(axis=0)
    scatter = [curve_distance(t, c, avg) for c in curves]
    report = {
        "t": t,
        "eta": eta,
        "curves": curves,
        "average": avg,
        "pointwise_std": curves.std(axis=0, ddof=1) if len(curves) > 1 else np.zeros_like(t),
        "scatter": np.array(scatter),
        "integrals": np.array([np.trapezoid(c, t) for c in curves]),
        "min_eigenvalues": np.array([s[0] for s in spectra]),
    }
    if len(curves) >= 4:
        # scatter of four batch averages; shrinks like 1/sqrt(batch size) if curves cluster
        k = len(curves) // 4
        groups = curves[: 4 * k].reshape(4, k, -1).mean(axis=1)
        report["batch_pointwise_std"] = groups.std(axis=0, ddof=1)
    if a_hom is not None:
        n = fields[0].n
        hom = dos_curve(dense_eigenvalues(homogenized_operator(n, a_hom)), eta, t).values
        report["homogenized"] = hom
        report["homogenized_distance"] = curve_distance(t, hom, avg)
    return report
