"""Decay of the fluctuations of A_bar with the number of inclusions per side."""

from fractions import Fraction

from stochhom import EnsembleParams, scaling_fit, std_dev_sweep, systematic_error_sweep

N = 200
base = EnsembleParams(L=2, m0=4, alpha=Fraction(1, 4), lam=0.4)
std = std_dev_sweep(base, [2, 4, 8, 16], N, master_seed=1)
print(" L   std(a12)   std(a11-a22)")
for r in std.rows:
    print(f"{r['L']:2d}  {r['std_a12']:.6f}   {r['std_diag_diff']:.6f}")
Ls = [r["L"] for r in std.rows]
for col in ("std_a12", "std_diag_diff"):
    slope, _, _ = scaling_fit(list(zip(Ls, std.column(col))))
    print(f"log-log slope of {col}: {slope:.3f} (1/L decay gives -1)")

sys_err = systematic_error_sweep(base, [2, 4, 8], N, master_seed=1)
print(" L   <a11>_L - <a11>_2L   jackknife SE")
for r in sys_err.rows:
    print(f"{r['L']:2d}  {r['diff']:+.6f}           {r['se']:.6f}")
