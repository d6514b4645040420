"""Monte-Carlo statistics of per-realization homogenized matrices.

Realization ``n`` of an ensemble at RVE size ``L`` uses the field stream
``(ensemble_seed(master_seed, L), n)``, so different ``L`` never share draws
and results do not depend on how realizations are spread over workers.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ParameterError
from .field import EnsembleParams, ensemble_seed, sample_field
from .homogenize import HomogenizedMatrix, homogenize
from .solver import build_preconditioner

__all__ = [
    "realize",
    "realize_batch",
    "MomentAccumulator",
    "EnsembleStats",
    "run_ensemble",
    "merge_stats",
    "quartic_tensor",
    "jackknife_quartic",
    "jackknife_rms",
    "quartic_diagnostics",
    "SweepTable",
    "systematic_error_sweep",
    "std_dev_sweep",
    "quartic_sweep",
    "scaling_fit",
]


def realize(params: EnsembleParams, seed: int, index: int, delta: float = 0.0, precond=None) -> HomogenizedMatrix:
    """Homogenized matrix of realization ``index`` drawn with field seed ``seed``."""
    return homogenize(sample_field(params, seed, index), params.lam, params.tol, delta, precond=precond)


def realize_batch(params: EnsembleParams, seed: int, indices, delta: float = 0.0):
    P = build_preconditioner(params.n, params.lam, delta)
    return [realize(params, seed, i, delta, P) for i in indices]


def _sym_flat(A: np.ndarray) -> np.ndarray:
    """Symmetrized matrices flattened as (a11, a12, a21, a22)."""
    S = 0.5 * (A + np.swapaxes(A, -1, -2))
    return S.reshape(*A.shape[:-2], 4)


@dataclass
class MomentAccumulator:
    """Mergeable first/second moments of a stream of 2x2 matrices.

    ``mean`` is the mean of the raw flattened matrices, ``comoment`` the
    centred sum of outer products of their symmetric parts, and ``sq12`` /
    ``sqdd`` the raw sums of ``a12**2`` and ``(a11 - a22)**2``.
    """

    count: int = 0
    mean: np.ndarray = dc_field(default_factory=lambda: np.zeros(4))
    comoment: np.ndarray = dc_field(default_factory=lambda: np.zeros((4, 4)))
    sq12: float = 0.0
    sqdd: float = 0.0

    @classmethod
    def from_samples(cls, samples) -> "MomentAccumulator":
        A = np.asarray(samples, dtype=float).reshape(-1, 2, 2)
        n = len(A)
        if n == 0:
            return cls()
        flat = A.reshape(n, 4)
        mean = np.array([math.fsum(flat[:, k]) / n for k in range(4)])
        d = _sym_flat(A) - _sym_flat(mean.reshape(2, 2))
        com = np.array([[math.fsum(d[:, p] * d[:, q]) for q in range(4)] for p in range(4)])
        sq12 = math.fsum(A[:, 0, 1] ** 2)
        sqdd = math.fsum((A[:, 0, 0] - A[:, 1, 1]) ** 2)
        return cls(n, mean, com, sq12, sqdd)

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if self.count == 0:
            return other
        if other.count == 0:
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        ds = _sym_flat(delta.reshape(2, 2))
        com = self.comoment + other.comoment + np.outer(ds, ds) * (self.count * other.count / n)
        return MomentAccumulator(n, mean, com, self.sq12 + other.sq12, self.sqdd + other.sqdd)


def quartic_tensor(comoment: np.ndarray, count: int, L: int, d: int = 2) -> np.ndarray:
    """``L**d / (N-1) * sum (A_n - mean)^{(x)2}`` in the 4x4 Kronecker layout.

    Entry ``[2a + c, 2b + d]`` is ``Q(e_a, e_b, e_c, e_d) = L^d cov(a_ab, a_cd)``.
    """
    if count < 2:
        raise ParameterError("quartic tensor needs at least two realizations")
    T = np.asarray(comoment).reshape(2, 2, 2, 2) * (float(L) ** d / (count - 1))
    return T.transpose(0, 2, 1, 3).reshape(4, 4)


def _quartic_4d(Q: np.ndarray) -> np.ndarray:
    """Kronecker-layout 4x4 -> tensor indexed ``[a, b, c, d]``."""
    return np.asarray(Q).reshape(2, 2, 2, 2).transpose(0, 2, 1, 3)


@dataclass
class EnsembleStats:
    N: int
    mean: np.ndarray
    std_a12: float
    std_diag_diff: float
    quartic: np.ndarray
    master_seed: int | None
    params: EnsembleParams
    moments: MomentAccumulator = dc_field(repr=False, default=None)
    samples: np.ndarray | None = dc_field(repr=False, default=None)
    iterations: np.ndarray | None = dc_field(repr=False, default=None)
    converged: bool = True

    @classmethod
    def from_moments(cls, acc: MomentAccumulator, params, master_seed=None, samples=None, iterations=None, converged=True):
        N = acc.count
        return cls(
            N=N,
            mean=acc.mean.reshape(2, 2).copy(),
            std_a12=math.sqrt(acc.sq12 / N),
            std_diag_diff=math.sqrt(acc.sqdd / N),
            quartic=quartic_tensor(acc.comoment, N, params.L),
            master_seed=master_seed,
            params=params,
            moments=acc,
            samples=samples,
            iterations=iterations,
            converged=converged,
        )

    def quartic_entry(self, a: int, b: int, c: int, d: int) -> float:
        """``Q(e_a, e_b, e_c, e_d)`` with 1-based directions."""
        return float(_quartic_4d(self.quartic)[a - 1, b - 1, c - 1, d - 1])

    @property
    def mean_a11(self) -> float:
        return float(self.mean[0, 0])

    def se_mean(self) -> np.ndarray:
        """Standard error of each entry of ``mean`` (jackknife = s/sqrt(N) for a mean)."""
        if self.samples is None:
            raise ValueError("per-realization samples were not kept")
        return self.samples.std(axis=0, ddof=1) / math.sqrt(self.N)


def run_ensemble(
    params: EnsembleParams,
    N: int,
    master_seed: int,
    workers: int = 1,
    delta: float = 0.0,
    indices=None,
    keep_samples: bool = True,
) -> EnsembleStats:
    """Homogenize realizations ``1..N`` and collect their statistics.

    ``indices`` overrides the realization labels (any sequence of ints >= 1).
    Reduction is ordered by position, so any ``workers`` gives identical stats.
    """
    if indices is None:
        if N < 2:
            raise ParameterError(f"need N >= 2 realizations, got {N}")
        indices = list(range(1, N + 1))
    else:
        indices = [int(i) for i in indices]
        if len(indices) < 2:
            raise ParameterError("need at least two realizations")
    seed = ensemble_seed(master_seed, params.L)
    workers = max(1, int(workers or 1))
    if workers == 1 or len(indices) < 2 * workers:
        results = realize_batch(params, seed, indices, delta)
    else:
        chunks = np.array_split(np.asarray(indices), workers * 4)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(realize_batch, params, seed, c.tolist(), delta) for c in chunks if len(c)]
            results = [h for fut in futures for h in fut.result()]
    samples = np.array([h.as_array() for h in results])
    iterations = np.array([h.iterations for h in results])
    acc = MomentAccumulator.from_samples(samples)
    converged = all(h.converged for h in results)
    return EnsembleStats.from_moments(
        acc, params, master_seed, samples if keep_samples else None, iterations if keep_samples else None, converged
    )


def merge_stats(a: EnsembleStats, b: EnsembleStats) -> EnsembleStats:
    """Statistics of the union of two disjoint runs with identical parameters."""
    if a.params != b.params:
        raise ParameterError("cannot merge ensembles with different parameters")
    acc = a.moments.merge(b.moments)
    samples = None
    if a.samples is not None and b.samples is not None:
        samples = np.concatenate([a.samples, b.samples])
    iterations = None
    if a.iterations is not None and b.iterations is not None:
        iterations = np.concatenate([a.iterations, b.iterations])
    return EnsembleStats.from_moments(acc, a.params, a.master_seed, samples, iterations, a.converged and b.converged)


# --- jackknife ------------------------------------------------------------------


def _jackknife_se(theta_loo: np.ndarray) -> np.ndarray:
    n = theta_loo.shape[0]
    centred = theta_loo - theta_loo.mean(axis=0)
    return np.sqrt((n - 1) / n * np.sum(centred**2, axis=0))


def jackknife_quartic(samples, L: int, d: int = 2):
    """Leave-one-out quartic tensors (N x 4 x 4) and the jackknife standard errors (4 x 4)."""
    A = np.asarray(samples, dtype=float).reshape(-1, 2, 2)
    n = len(A)
    if n < 3:
        raise ParameterError("jackknife needs at least three realizations")
    x = _sym_flat(A)
    dev = x - x.mean(axis=0)
    S = dev.T @ dev
    # removing sample i: S_(i) = S - n/(n-1) d_i d_i^T, normalised by (n-1) - 1
    loo = (S[None] - (n / (n - 1)) * dev[:, :, None] * dev[:, None, :]) * (float(L) ** d / (n - 2))
    loo = loo.reshape(n, 2, 2, 2, 2).transpose(0, 1, 3, 2, 4).reshape(n, 4, 4)
    return loo, _jackknife_se(loo)


def jackknife_rms(values) -> float:
    """Jackknife standard error of ``sqrt(mean(values**2))``."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    total = np.sum(v**2)
    loo = np.sqrt((total - v**2) / (n - 1))
    return float(_jackknife_se(loo))


_ZERO_ENTRIES = [
    (1, 1, 1, 2), (1, 1, 2, 1), (1, 2, 1, 1), (2, 1, 1, 1),
    (1, 2, 2, 2), (2, 1, 2, 2), (2, 2, 1, 2), (2, 2, 2, 1),
]
_WG14 = [(1, 2, 1, 2), (1, 2, 2, 1), (2, 1, 1, 2), (2, 1, 2, 1)]


def _q_index(a, b, c, d):
    return 2 * (a - 1) + (c - 1), 2 * (b - 1) + (d - 1)


def quartic_diagnostics(stats: EnsembleStats) -> dict:
    """Symmetry relations of the rescaled covariance tensor with jackknife errors.

    Reports the three characteristic values, the eight entries that vanish by
    reflection symmetry, and ``Q1111 - Q2222``.
    """
    Q = stats.quartic
    if stats.samples is not None and stats.N >= 3:
        loo, se = jackknife_quartic(stats.samples, stats.params.L)
        diff_loo = loo[:, 0, 0] - loo[:, 3, 3]
        se_diff = float(_jackknife_se(diff_loo))
    else:
        se = np.full((4, 4), np.nan)
        se_diff = float("nan")

    def entry(idx):
        r, c = _q_index(*idx)
        return float(Q[r, c]), float(se[r, c])

    wg14_vals = [entry(i)[0] for i in _WG14]
    q1122, q2211 = entry((1, 1, 2, 2))[0], entry((2, 2, 1, 1))[0]
    zeros = []
    for idx in _ZERO_ENTRIES:
        v, s = entry(idx)
        zeros.append({"entry": "Q" + "".join(map(str, idx)), "value": v, "se": s})
    q1111, q2222 = entry((1, 1, 1, 1))[0], entry((2, 2, 2, 2))[0]
    return {
        "N": stats.N,
        "L": stats.params.L,
        "Q1111": q1111,
        "Q1122": q1122,
        "Q1212": wg14_vals[0],
        "wg14_residual": max(wg14_vals) - min(wg14_vals),
        "wg15_residual": abs(q1122 - q2211),
        "zero_entries": zeros,
        "diag_diff": abs(q1111 - q2222),
        "diag_diff_se": se_diff,
    }


# --- sweeps over L --------------------------------------------------------------


@dataclass
class SweepTable:
    kind: str
    rows: list[dict]
    columns: list[str]

    def __post_init__(self):
        Ls = [r["L"] for r in self.rows]
        if any(b <= a for a, b in zip(Ls, Ls[1:])):
            raise ParameterError("sweep L values must be strictly increasing")
        if any(L & (L - 1) for L in Ls):
            raise ParameterError("sweep L values must be powers of two")

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)


def _check_L_list(L_list):
    Ls = [int(L) for L in L_list]
    if any(L < 1 or L & (L - 1) for L in Ls) or any(b <= a for a, b in zip(Ls, Ls[1:])):
        raise ParameterError(f"L_list must be increasing powers of two, got {L_list}")
    return Ls


def _ensembles(params_base, Ls, N, master_seed, workers, cache):
    out = {}
    for L in Ls:
        n_real = N(L) if callable(N) else N
        key = (L, n_real)
        if key not in cache:
            cache[key] = run_ensemble(params_base.replace(L=L), n_real, master_seed, workers)
        out[L] = cache[key]
    return out


def systematic_error_sweep(params_base: EnsembleParams, L_list, N: int, master_seed: int, workers: int = 1, cache=None):
    """``<a_L,11> - <a_2L,11>`` for each L, with standard errors of the difference."""
    Ls = _check_L_list(L_list)
    cache = {} if cache is None else cache
    stats = _ensembles(params_base, sorted(set(Ls) | {2 * L for L in Ls}), N, master_seed, workers, cache)
    rows = []
    for L in Ls:
        s, s2 = stats[L], stats[2 * L]
        se = math.hypot(s.se_mean()[0, 0], s2.se_mean()[0, 0])
        rows.append(
            {"L": L, "N": s.N, "mean_a11_L": s.mean_a11, "mean_a11_2L": s2.mean_a11,
             "diff": s.mean_a11 - s2.mean_a11, "se": se}
        )
    return SweepTable("systematic_error", rows, ["L", "N", "mean_a11_L", "mean_a11_2L", "diff", "se"])


def std_dev_sweep(params_base: EnsembleParams, L_list, N: int, master_seed: int, workers: int = 1, cache=None):
    """Raw RMS of ``a12`` and of ``a11 - a22`` for each L."""
    Ls = _check_L_list(L_list)
    cache = {} if cache is None else cache
    stats = _ensembles(params_base, Ls, N, master_seed, workers, cache)
    rows = []
    for L in Ls:
        s = stats[L]
        rows.append(
            {"L": L, "N": s.N, "std_a12": s.std_a12, "se_a12": jackknife_rms(s.samples[:, 0, 1]),
             "std_diag_diff": s.std_diag_diff,
             "se_diag_diff": jackknife_rms(s.samples[:, 0, 0] - s.samples[:, 1, 1]),
             "mean_iterations": float(s.iterations.mean())}
        )
    return SweepTable("std_dev", rows, ["L", "N", "std_a12", "se_a12", "std_diag_diff", "se_diag_diff", "mean_iterations"])


def quartic_sweep(params_base: EnsembleParams, L_list, master_seed: int, N=None, workers: int = 1, cache=None):
    """``q_L,11 - q_2L,11`` and ``q_L,14 - q_2L,14`` (4x4 layout, 1-based); ``N = L**2`` by default."""
    Ls = _check_L_list(L_list)
    cache = {} if cache is None else cache
    if N is None:
        N = lambda L: max(L * L, 3)  # noqa: E731
    stats = _ensembles(params_base, sorted(set(Ls) | {2 * L for L in Ls}), N, master_seed, workers, cache)
    rows = []
    for L in Ls:
        q, q2 = stats[L].quartic, stats[2 * L].quartic
        rows.append(
            {"L": L, "N": stats[L].N, "q11": q[0, 0], "q14": q[0, 3],
             "q11_diff": q[0, 0] - q2[0, 0], "q14_diff": q[0, 3] - q2[0, 3]}
        )
    return SweepTable("quartic_diff", rows, ["L", "N", "q11", "q14", "q11_diff", "q14_diff"])


def scaling_fit(points):
    """Least-squares fit ``log(value) = slope*log(L) + intercept``.

    Non-positive values are dropped with a warning.  Returns ``(slope, intercept, r2)``.
    """
    pts = [(float(L), float(v)) for L, v in points]
    bad = [p for p in pts if not p[1] > 0]
    if bad:
        warnings.warn(f"dropping {len(bad)} non-positive value(s) from scaling fit", RuntimeWarning)
    pts = [p for p in pts if p[1] > 0]
    if len(pts) < 3:
        raise ParameterError("scaling fit needs at least three positive points")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
