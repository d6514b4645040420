"""Density of states of small stochastic operators against the homogenized operator."""

from fractions import Fraction

import numpy as np

from stochhom import EnsembleParams, ensemble_seed, homogenize, sample_field
from stochhom.spectral import clustering_report

for L in (4, 12):
    p = EnsembleParams(L=L, m0=4, alpha=Fraction(1, 4), lam=0.5)
    fields = [sample_field(p, ensemble_seed(1, L), i) for i in range(1, 11)]
    a_hom = np.mean([homogenize(F).as_array() for F in fields], axis=0)
    rep = clustering_report(fields, p.lam, a_hom=a_hom)
    print(f"L = {L:2d}, n = {p.n}: eta = {rep['eta']:.3f}, "
          f"mean scatter {rep['scatter'].mean():.3e}, "
          f"max pointwise std {rep['pointwise_std'].max():.3e}, "
          f"distance to homogenized DOS {rep['homogenized_distance']:.3e}")
