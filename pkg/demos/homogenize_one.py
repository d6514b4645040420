"""Sample one field, solve both correctors and print the homogenized matrix."""

from fractions import Fraction

import numpy as np

from stochhom import EnsembleParams, SymmetryOp, homogenize, laminate_field, sample_field, transform_field

p = EnsembleParams(L=4, m0=8, alpha=Fraction(1, 4), lam=0.4, tol=1e-10)
F = sample_field(p, seed=1, index=1)
print(f"n = {p.n}, coverage = {F.cell_indicator.mean():.3f}")
for row in F.cell_indicator[::2, ::2]:
    print("".join("#" if c else "." for c in row))

H = homogenize(F)
print("A_bar =\n", np.array2string(H.as_array(), precision=6))
print(f"PCG iterations {H.iterations}, asymmetry {H.asymmetry:.1e}")

R = SymmetryOp("rotate90").matrix
Hr = homogenize(transform_field(F, SymmetryOp("rotate90"))).as_array()
print(f"rotation equivariance defect {np.abs(Hr - R @ H.as_array() @ R.T).max():.1e}")

lam_field = homogenize(laminate_field(p, axis=0, fill=0.5))
print(f"laminate: a11 = {lam_field.a11:.8f} (harmonic 4/7), a22 = {lam_field.a22:.8f} (arithmetic 0.7)")
