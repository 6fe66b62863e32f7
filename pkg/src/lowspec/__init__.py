"""Characterize a probability measure at the bottom of its support.

The package estimates the atom mass, inverse moment, and Stieltjes
transform of a measure near its infimum from time-averaged quotients of
its Laplace transform, realizes the same quantities through an
infinite-server queue whose dormant probability reproduces the shifted
transform, and applies both routes to rank-one perturbations and small
generalized spin-boson models to decide whether a ground state exists.
"""

from .laplace import LaplaceEvaluator, TiltedStats
from .measures import (
    AtomComponent,
    DensityComponent,
    ExponentialTail,
    MeasureError,
    PiecewisePolynomial,
    PowerEdge,
    ProbabilityMeasure,
    dirac,
    exponential,
    stieltjes_transform,
    two_atoms,
    uniform,
)
from .rankone import (
    RankOneError,
    RankOneModel,
    SpectralResult,
    atom_mass_profile,
    concavity_check,
    discretize,
    dyson_identity_check,
    feynman_hellmann_check,
    random_model,
    spectral,
)
from .renewal import (
    ClassifyThresholds,
    RenewalError,
    RenewalTransform,
    SimStats,
    atom_via_renewal,
    build_renewal_transform,
    classify_singularity,
    conditioned_dormancy_check,
    d1_ks_test,
    dormant_probability_check,
    inverse_moment_via_renewal,
    sample_paths,
    stieltjes_check,
)
from .spinboson import (
    BosonField,
    FKEstimate,
    GSBModel,
    GroundData,
    SpinBosonError,
    SpinSystem,
    bound_log_inv_rho_lower,
    bound_log_inv_rho_upper,
    check_stoquastic,
    exact_ground,
    exact_log_Z,
    fk_correlations,
    fk_mc_Z,
    infrared_integral,
    regularized_family,
    spectral_measure,
    ssb_model,
)
from .wiener import (
    atom_average_estimate,
    atom_quotient_estimate,
    fubini_average_oracle,
    inverse_moment_estimate,
    run_schedule,
)

__version__ = "0.1.0"

__all__ = [
    "AtomComponent",
    "BosonField",
    "ClassifyThresholds",
    "DensityComponent",
    "ExponentialTail",
    "FKEstimate",
    "GSBModel",
    "GroundData",
    "LaplaceEvaluator",
    "MeasureError",
    "PiecewisePolynomial",
    "PowerEdge",
    "ProbabilityMeasure",
    "RankOneError",
    "RankOneModel",
    "RenewalError",
    "RenewalTransform",
    "SimStats",
    "SpectralResult",
    "SpinBosonError",
    "SpinSystem",
    "TiltedStats",
    "atom_average_estimate",
    "atom_mass_profile",
    "atom_quotient_estimate",
    "atom_via_renewal",
    "bound_log_inv_rho_lower",
    "bound_log_inv_rho_upper",
    "build_renewal_transform",
    "check_stoquastic",
    "classify_singularity",
    "concavity_check",
    "conditioned_dormancy_check",
    "d1_ks_test",
    "dirac",
    "discretize",
    "dormant_probability_check",
    "dyson_identity_check",
    "exact_ground",
    "exact_log_Z",
    "exponential",
    "feynman_hellmann_check",
    "fk_correlations",
    "fk_mc_Z",
    "fubini_average_oracle",
    "infrared_integral",
    "inverse_moment_estimate",
    "inverse_moment_via_renewal",
    "random_model",
    "regularized_family",
    "run_schedule",
    "sample_paths",
    "spectral",
    "spectral_measure",
    "ssb_model",
    "stieltjes_check",
    "stieltjes_transform",
    "two_atoms",
    "uniform",
]
