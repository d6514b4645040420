"""Stochastic homogenization of two-phase periodic media on the 2D torus.

Random fields of overlapping square inclusions, Kronecker-sum stiffness
assembly, FFT-preconditioned CG, per-realization homogenized matrices and
their Monte-Carlo statistics.
"""

from .errors import InputError, NumericalError, ParameterError
from .field import (
    CoefficientField,
    EnsembleParams,
    SymmetryOp,
    coefficient_on_grid,
    ensemble_seed,
    laminate_field,
    refine_field,
    sample_field,
    transform_field,
)
from .assembly import (
    assemble_laplacian,
    assemble_rhs,
    assemble_stochastic,
    assemble_total,
    export_matrix_market,
    reference_assemble,
)
from .solver import Preconditioner, SolveReport, build_preconditioner, extreme_generalized_eigs, pcg_solve
from .homogenize import (
    HomogenizedMatrix,
    energy_matrix,
    homogenize,
    homogenized_matrix,
    refinement_study,
    solve_correctors,
)
from .ensemble import (
    EnsembleStats,
    MomentAccumulator,
    merge_stats,
    quartic_diagnostics,
    quartic_sweep,
    run_ensemble,
    scaling_fit,
    std_dev_sweep,
    systematic_error_sweep,
)
from .spectral import DosCurve, clustering_report, dense_eigenvalues, dos_curve

__version__ = "0.1.0"
