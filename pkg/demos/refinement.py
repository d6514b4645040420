"""Grid refinement of the Poisson problem with a smooth load, constant vs rough coefficient."""

from fractions import Fraction

import numpy as np

from stochhom.homogenize import estimate_order, refinement_study

grids = [32, 64, 128, 256, 512]
for lam in (1.0, 0.1):
    res = refinement_study(2, lam, Fraction(1, 2), 1, grids)
    print(f"lambda = {lam}")
    print("  successive differences", " ".join(f"{d:.2e}" for d in res.differences))
    print("  decay factors         ", np.array2string(res.decay_factors, precision=3))
    print(f"  estimated order {estimate_order(res):.2f}")
