"""Causal effect estimation under nearest-neighbor interference on observed networks.

Point estimation uses inverse-probability weights built from one of two
joint exposure propensity models; uncertainty comes from a closed-form
M-estimation sandwich over network components.  A simulation harness
reproduces the finite-sample behavior of both estimators at desk scale.
"""

from .api import NetworkIPWEstimator, effect_pairs, estimate_effects
from .estimator import (
    EffectEstimate,
    PotentialOutcomeEstimate,
    effect,
    weighted_terms,
    y_hat,
)
from .exceptions import (
    ConvergenceError,
    EmptyInputError,
    GraphInputError,
    IsolateError,
    NetipwError,
    NetworkGenerationError,
    SeparationError,
    SingularMatrixError,
    StudyError,
    ValidationError,
    WeightFloorError,
)
from .graph import (
    ComponentPartition,
    Network,
    NetworkStats,
    components,
    fast_greedy_communities,
    load_network,
    modularity,
    network_stats,
)
from .policy import AllocationPolicy, pi_count, pi_individual, pi_joint, pi_vector
from .propensity import (
    Interference,
    Ipw1Fit,
    Ipw2Fit,
    StudyData,
    closed_neighborhoods,
    component_groups,
    eval_f1,
    eval_f2,
    fit_ipw1,
    fit_ipw2,
    neighbor_exposure_counts,
    score,
    score_components,
    validate_study,
)
from .simulate import (
    PotentialOutcomeTable,
    ScenarioConfig,
    SimulationReport,
    gen_exposures,
    gen_potential_outcomes,
    gen_regular_network,
    observed_outcomes,
    run_study,
    trip_like_fixture,
    true_estimands,
)
from .variance import (
    SandwichCovariance,
    ThetaVector,
    contrast_se,
    effect_with_ci,
    estimate_theta,
    psi_component,
    psi_matrix,
    sandwich,
    wald_ci,
)

__version__ = "0.1.0"
