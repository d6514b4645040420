"""Acceptance criteria, one test each.

Every random input derives from ``MASTER_SEED`` through ``ensemble_seed``,
the same path the command line uses.  Each test prints one PASS/FAIL line
per checked statement before asserting.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from stochhom.assembly import assemble_rhs, assemble_total, reference_assemble
from stochhom.ensemble import (
    jackknife_rms,
    quartic_diagnostics,
    run_ensemble,
    scaling_fit,
    std_dev_sweep,
    systematic_error_sweep,
)
from stochhom.field import CoefficientField, EnsembleParams, SymmetryOp, ensemble_seed, laminate_field, sample_field
from stochhom.field import transform_field
from stochhom.homogenize import homogenize, refinement_study, solve_correctors
from stochhom.spectral import clustering_report

MASTER_SEED = 1


def _rng(tag: int) -> np.random.Generator:
    return np.random.default_rng([MASTER_SEED, tag])


def test_c01_assembly_oracle_equivalence(verdict):
    rng = _rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        L = int(rng.choice([2, 4]))
        m0 = int(rng.choice([4, 8]))
        alpha = Fraction(int(rng.integers(1, m0 // 2 + 1)), m0)
        lam = float(rng.uniform(0.01, 1.0))
        F = sample_field(EnsembleParams(L, m0, alpha, lam), ensemble_seed(MASTER_SEED, L), int(rng.integers(1, 10**6)))
        worst = max(worst, abs(assemble_total(F) - reference_assemble(F, lam)).max())
    elapsed = time.perf_counter() - t0
    ok = verdict("C1", worst <= 1e-12 and elapsed < 60, f"max |A_kron - A_ref| = {worst:.2e} (<= 1e-12), {elapsed:.1f}s (< 60s)")
    assert ok


def test_c02_null_space_and_compatibility(verdict):
    rng = _rng(2)
    worst_null, worst_compat = 0.0, 0.0
    for _ in range(50):
        L = int(rng.choice([1, 2, 4, 8]))
        m0 = int(rng.choice([2, 4, 8]))
        alpha = Fraction(int(rng.integers(1, m0 // 2 + 1)), m0)
        lam = float(rng.uniform(0.01, 1.0))
        F = sample_field(EnsembleParams(L, m0, alpha, lam), ensemble_seed(MASTER_SEED, L), int(rng.integers(1, 10**6)))
        A = assemble_total(F)
        worst_null = max(worst_null, np.abs(A @ np.ones(F.n ** 2)).max())
        for i in (1, 2):
            f = assemble_rhs(F, lam, i)
            norm = np.linalg.norm(f)
            if norm > 0:
                worst_compat = max(worst_compat, abs(f.sum()) / norm)
    ok = verdict("C2", worst_null <= 1e-12 and worst_compat <= 1e-12,
                 f"max ||A 1||_inf = {worst_null:.2e}, max |<f,1>|/||f|| = {worst_compat:.2e} (both <= 1e-12)")
    assert ok


def test_c03_trivial_homogenization(verdict):
    errs = []
    for L, m0, alpha in [(2, 4, Fraction(1, 4)), (4, 8, Fraction(1, 2)), (8, 4, Fraction(1, 4))]:
        p = EnsembleParams(L, m0, alpha, 1.0, tol=1e-12)
        F = sample_field(p, ensemble_seed(MASTER_SEED, L), 1)
        errs.append(np.abs(homogenize(F).as_array() - np.eye(2)).max())
        for lam in (0.1, 0.5):
            q = p.replace(lam=lam)
            full = CoefficientField.from_cells(q, np.ones((q.n, q.n), bool))
            errs.append(np.abs(homogenize(full).as_array() - np.eye(2)).max())
        one = sample_field(EnsembleParams(1, m0, Fraction(1, 2), 0.2, tol=1e-12), ensemble_seed(MASTER_SEED, 1), 1)
        errs.append(np.abs(homogenize(one).as_array() - np.eye(2)).max())
    worst = max(errs)
    ok = verdict("C3", worst <= 1e-10, f"max |A_bar - I| over {len(errs)} cases = {worst:.2e} (<= 1e-10)")
    assert ok


def test_c04_laminate_oracle(verdict):
    p = EnsembleParams(4, 8, Fraction(1, 4), 0.4, tol=1e-12)
    H = homogenize(laminate_field(p, axis=0, fill=0.5))
    e11 = abs(H.a11 - 4 / 7)
    e22 = abs(H.a22 - 0.7)
    off = max(abs(H.a12), abs(H.a21))
    ok = verdict("C4", e11 <= 1e-8 and e22 <= 1e-8 and off <= 1e-8,
                 f"a11 = {H.a11:.10f} (4/7), a22 = {H.a22:.10f} (0.7), max |off| = {off:.1e} (all to 1e-8)")
    assert ok


def _iterations(p: EnsembleParams, seed: int, index: int) -> int:
    C = solve_correctors(sample_field(p, seed, index), p.lam, p.tol)
    return max(r.iterations for r in C.reports)


def test_c05_pcg_robustness(verdict):
    t0 = time.perf_counter()
    p = EnsembleParams(4, 8, Fraction(1, 2), 0.2, tol=1e-8)
    its_half = _iterations(p, ensemble_seed(MASTER_SEED, 4), 1)
    ok_a = verdict("C5a", its_half < 10, f"alpha=0.5, lambda=0.2, n=32: {its_half} iterations (< 10)")
    worst, drift = 0, 0
    table = []
    for lam in (0.1, 0.2, 0.4, 0.8):
        medians = []
        for m0 in (8, 16, 32):  # n = 32, 64, 128 at L = 4
            q = EnsembleParams(4, m0, Fraction(1, 4), lam, tol=1e-8)
            its = [_iterations(q, ensemble_seed(MASTER_SEED, 4), i) for i in range(1, 21)]
            worst = max(worst, max(its))
            medians.append(float(np.median(its)))
        drift = max(drift, max(abs(b - a) for a, b in zip(medians, medians[1:])))
        table.append(f"lam={lam}: {medians}")
    elapsed = time.perf_counter() - t0
    ok_b = verdict("C5b", worst <= 30 and drift <= 5 and elapsed < 120,
                   f"alpha=1/4: max iterations {worst} (<= 30), max median change {drift} (<= 5), "
                   f"medians n=32/64/128 {'; '.join(table)}; {elapsed:.0f}s (< 120s)")
    assert ok_a and ok_b


def test_c06_symmetry_vs_tolerance(verdict):
    p = EnsembleParams(4, 8, Fraction(1, 2), 0.2)
    F = sample_field(p, ensemble_seed(MASTER_SEED, 4), 1)
    tols = [1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 1e-11]
    asym = [homogenize(F, tol=t).asymmetry for t in tols]
    at_1e8 = asym[2]
    ratios = [a / b if b > 0 else math.inf for a, b in zip(asym, asym[1:])]
    ok_level = verdict("C6a", at_1e8 <= 1e-9, f"|a12 - a21| at tol 1e-8 = {at_1e8:.2e} (<= 1e-9)")
    ok_decay = verdict("C6b", all(r >= 10 for r in ratios),
                       "asymmetry per tol " + ", ".join(f"{t:.0e}:{a:.2e}" for t, a in zip(tols, asym))
                       + "; decrease factors " + ", ".join(f"{r:.1f}" for r in ratios) + " (each >= 10)")
    assert ok_level and ok_decay


def test_c07_standard_deviation_scaling(verdict):
    t0 = time.perf_counter()
    base = EnsembleParams(2, 4, Fraction(1, 4), 0.4)
    t = std_dev_sweep(base, [2, 4, 8, 16], 500, MASTER_SEED)
    Ls = [r["L"] for r in t.rows]
    s12, sdd = t.column("std_a12"), t.column("std_diag_diff")
    slope12, _, _ = scaling_fit(list(zip(Ls, s12)))
    slopedd, _, _ = scaling_fit(list(zip(Ls, sdd)))
    elapsed = time.perf_counter() - t0
    ok12 = -1.25 <= slope12 <= -0.75 and 0.00372 / 2 <= s12[0] <= 0.00372 * 2
    okdd = -1.25 <= slopedd <= -0.75 and 0.01153 / 2 <= sdd[0] <= 0.01153 * 2
    ok = verdict("C7", ok12 and okdd and elapsed < 600,
                 f"std(a12) {np.round(s12, 6).tolist()} slope {slope12:.3f}; std(a11-a22) {np.round(sdd, 6).tolist()} "
                 f"slope {slopedd:.3f} (slopes in [-1.25, -0.75], L=2 within x2 of 0.00372 / 0.01153); {elapsed:.0f}s")
    assert ok


def test_c08_systematic_error_trend(verdict):
    base = EnsembleParams(2, 4, Fraction(1, 4), 0.4)
    desk = systematic_error_sweep(base, [2, 4, 8], 1000, MASTER_SEED)
    d = desk.column("diff")
    ok_desk = verdict("C8a", bool(np.all(d > 0) and np.all(np.diff(d) < 0)),
                      f"N=1e3 differences L=2,4,8: {np.round(d, 6).tolist()} (positive, decreasing)")
    ext = systematic_error_sweep(base, [4], 10_000, MASTER_SEED)
    row = ext.rows[0]
    ok_ext = verdict("C8b", abs(row["diff"] - 0.0033) <= 3 * row["se"],
                     f"N=1e4, L=4: {row['diff']:.6f} +- {row['se']:.6f} (within 3 SE of 0.0033)")
    assert ok_desk and ok_ext


def test_c09_quartic_tensor(verdict):
    t0 = time.perf_counter()
    stats = run_ensemble(EnsembleParams(8, 4, Fraction(1, 4), 0.4), 2000, MASTER_SEED)
    d = quartic_diagnostics(stats)
    exact = d["wg14_residual"] == 0.0 and d["wg15_residual"] == 0.0
    zeros_ok = all(abs(z["value"]) <= 3 * z["se"] for z in d["zero_entries"])
    diag_ok = d["diag_diff"] <= 3 * d["diag_diff_se"]
    worst_z = max(abs(z["value"]) / z["se"] for z in d["zero_entries"])
    elapsed = time.perf_counter() - t0
    ok = verdict("C9", exact and zeros_ok and diag_ok and elapsed < 900,
                 f"wg14/wg15 residuals {d['wg14_residual']:.1e}/{d['wg15_residual']:.1e} (exact 0); "
                 f"max |zero entry|/SE = {worst_z:.2f} (<= 3); |Q1111-Q2222| = {d['diag_diff']:.2e} "
                 f"vs 3 SE = {3 * d['diag_diff_se']:.2e}; Q1111={d['Q1111']:.3e} Q1122={d['Q1122']:.3e} "
                 f"Q1212={d['Q1212']:.3e}; {elapsed:.0f}s")
    assert ok


def test_c10_refinement_study(verdict):
    t0 = time.perf_counter()
    grids = [32, 64, 128, 256, 512, 1024]
    seed = ensemble_seed(MASTER_SEED, 2)
    control = refinement_study(2, 1.0, Fraction(1, 2), seed, grids)
    cf = control.decay_factors
    ok_control = verdict("C10a", bool(np.all((cf >= 3.6) & (cf <= 4.4))),
                         f"lambda=1 decay factors {np.round(cf, 3).tolist()} (each in [3.6, 4.4])")
    res = refinement_study(2, 0.1, Fraction(1, 2), seed, grids)
    f = res.decay_factors
    mean_last = float(np.mean(f[-3:]))
    ok_rate = verdict("C10b", 2.2 <= mean_last <= 3.4,
                      f"L=2, lambda=0.1 decay factors {np.round(f, 3).tolist()}, mean of last three {mean_last:.3f} "
                      "(in [2.2, 3.4])")
    reference = np.array([0.0051, 0.0015, 5.03e-4, 1.806e-4])  # levels ending at 127, 255, 511, 1023
    ours = res.differences[1:]  # levels ending at 128, 256, 512, 1024
    ratio = ours / reference
    elapsed = time.perf_counter() - t0
    ok_mag = verdict("C10c", bool(np.all((ratio >= 0.5) & (ratio <= 2.0))) and elapsed < 600,
                     f"differences {[f'{x:.3e}' for x in ours]} / reference = {np.round(ratio, 3).tolist()} "
                     f"(each within x2); {elapsed:.0f}s")
    assert ok_control and ok_rate and ok_mag


def test_c11_density_of_states(verdict):
    t0 = time.perf_counter()
    p = EnsembleParams(4, 8, Fraction(1, 4), 0.5)  # n = 32
    seed = ensemble_seed(MASTER_SEED, 4)
    fields = [sample_field(p, seed, i) for i in range(1, 21)]
    rep = clustering_report(fields, p.lam)
    norm_err = float(np.abs(rep["integrals"] - 1.0).max())
    min_eig = float(np.abs(rep["min_eigenvalues"]).max())
    generated = rep["curves"].shape == (20, 1024) and np.all(np.isfinite(rep["pointwise_std"]))
    elapsed = time.perf_counter() - t0
    ok = verdict("C11", norm_err <= 1e-6 and min_eig <= 1e-10 and bool(generated) and elapsed < 300,
                 f"max |integral - 1| = {norm_err:.1e} (<= 1e-6), max |lambda_min| = {min_eig:.1e} (<= 1e-10), "
                 f"20-curve report with mean L2 scatter {rep['scatter'].mean():.3e}; {elapsed:.0f}s")
    assert ok


def test_c12_equivariance(verdict):
    t0 = time.perf_counter()
    rng = _rng(12)
    tol = 1e-8
    worst_rot, worst_tr = 0.0, 0.0
    R = SymmetryOp("rotate90").matrix
    for _ in range(10):
        L = int(rng.choice([2, 4]))
        m0 = int(rng.choice([4, 8]))
        alpha = Fraction(int(rng.integers(1, m0 // 2 + 1)), m0)
        p = EnsembleParams(L, m0, alpha, float(rng.uniform(0.1, 1.0)), tol=tol)
        F = sample_field(p, ensemble_seed(MASTER_SEED, L), int(rng.integers(1, 10**6)))
        H = homogenize(F).as_array()
        Hr = homogenize(transform_field(F, SymmetryOp("rotate90"))).as_array()
        shift = SymmetryOp.translate(int(rng.integers(0, p.n)), int(rng.integers(0, p.n)))
        Ht = homogenize(transform_field(F, shift)).as_array()
        worst_rot = max(worst_rot, np.abs(Hr - R @ H @ R.T).max())
        worst_tr = max(worst_tr, np.abs(Ht - H).max())
    elapsed = time.perf_counter() - t0
    ok = verdict("C12", worst_rot <= 10 * tol and worst_tr <= 10 * tol and elapsed < 60,
                 f"max rotation defect {worst_rot:.2e}, max translation defect {worst_tr:.2e} (<= {10 * tol:.0e}); "
                 f"{elapsed:.1f}s")
    assert ok
