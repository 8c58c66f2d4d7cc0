"""Variance decomposition and counterfactual uncertainty quantification for
before-and-after repeated-measures randomized trials.

The pipeline: ingest trial data (or a summary triple of variances), estimate
the visit-1/milestone second moments, split them into intercept (Z),
trajectory, and measurement-error (E) variance components, and from those
quantify how much of the treatment-contrast variance is removed by
change-from-baseline analysis and by counterfactual (self-controlled)
uncertainty quantification -- plus the implied sample sizes, and the
attenuation bias incurred when a noisy biomarker stands in for the true
intercept.
"""

from .cuq import (
    CuqReport,
    EntryCriterionRow,
    baselining_gain,
    cuq_report,
    entry_criterion_study,
    sample_size,
)
from .decompose import (
    CovTermReport,
    EtzComponents,
    FeasibilityVerdict,
    cov_aware_terms,
    decompose_independent,
    feasibility_check,
    reconstruct_moments,
)
from .errors import EtzError, InfeasibleDecompositionError, ValidationError
from .estimators import (
    BiasReport,
    LinearFit,
    OutcomeModelParams,
    attenuation_factor,
    control_side_bias,
    control_side_estimate,
    corrected_slope,
    equipoise_bias,
    equipoise_estimate,
    fit_arm_regression,
    mc_bias_study,
    population_fit_on_biomarker,
    replicate_estimates,
)
from .moments import (
    ArmVisitMeans,
    VisitMoments,
    arm_visit_means,
    per_arm_visit_moments,
    pooled_visit_moments,
)
from .simulate import (
    PotentialOutcomes,
    SimConfig,
    SubjectOutcomes,
    independence_diagnostic,
    simulate_counterfactual,
    simulate_trial,
    stream,
    to_factual,
)
from .trial_data import (
    SubjectRecord,
    TrialDataset,
    complete_cases,
    export_long,
    export_wide,
    parse_long,
    parse_wide,
)

__version__ = "0.1.0"

__all__ = [
    "ArmVisitMeans",
    "BiasReport",
    "CovTermReport",
    "CuqReport",
    "EntryCriterionRow",
    "EtzComponents",
    "EtzError",
    "FeasibilityVerdict",
    "InfeasibleDecompositionError",
    "LinearFit",
    "OutcomeModelParams",
    "PotentialOutcomes",
    "SimConfig",
    "SubjectOutcomes",
    "SubjectRecord",
    "TrialDataset",
    "ValidationError",
    "VisitMoments",
    "arm_visit_means",
    "attenuation_factor",
    "baselining_gain",
    "complete_cases",
    "control_side_bias",
    "control_side_estimate",
    "corrected_slope",
    "cov_aware_terms",
    "cuq_report",
    "decompose_independent",
    "entry_criterion_study",
    "equipoise_bias",
    "equipoise_estimate",
    "export_long",
    "export_wide",
    "feasibility_check",
    "fit_arm_regression",
    "independence_diagnostic",
    "mc_bias_study",
    "parse_long",
    "parse_wide",
    "per_arm_visit_moments",
    "pooled_visit_moments",
    "population_fit_on_biomarker",
    "reconstruct_moments",
    "replicate_estimates",
    "sample_size",
    "simulate_counterfactual",
    "simulate_trial",
    "stream",
    "to_factual",
]
