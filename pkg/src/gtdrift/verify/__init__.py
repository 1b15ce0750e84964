"""Analytical identity checks, PDE checks and Monte Carlo comparisons against the kernels."""
from .identities import (
    GramConditionError,
    biorthogonality_error,
    biorthogonalize_numerically,
    closed_form_coefficients,
    convolution_error,
    discrete_biorthogonality_error,
    discrete_gram,
    full_pattern_identity,
    gram_matrix,
    iterated_steps,
    m_matrix,
    m_matrix_report,
    random_pattern,
    semigroup_error,
    symmetrised_joint_density,
)
from .pde import boundary_condition_check, boundary_configurations, fokker_planck_residual
from .statistics import (
    CorrelationEstimate,
    DistanceReport,
    binomial_threshold,
    compare_to_kernel,
    default_edges,
    distance,
    estimate_one_point,
    estimate_two_point,
    kernel_bin_average,
    two_point_bin_average,
    two_point_distance,
)
from .studies import (
    LadderRow,
    convergence_ladder,
    mc_vs_kernel,
    non_increasing,
    restriction_pvalues,
    scaling_study,
    worst_per_step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
