"""Sign-constrained least squares with certified design-condition checkers,
finite-sample bound evaluators, and a network simulation harness."""

from .bounds import (
    BoundInputs,
    coefficient_l1_bound,
    gaussian_cdf,
    gaussian_tail_constant,
    gradient_event_floor,
    joint_recovery_floor,
    min_signal_threshold,
    oracle_coincidence_floor,
    oracle_prediction_bound,
    residual_gradient_threshold,
    support_recovery_betamin,
    top_s_support,
)
from .conditions import (
    CompatibilityResult,
    NegativeEntriesResult,
    PositiveEigenvalueResult,
    TransferReport,
    block_structure_bound,
    compatibility_constant_exact,
    compatibility_lower_bound,
    few_negative_entries_bound,
    population_transfer,
    positive_eigenvalue,
    strictly_positive_entries_bound,
)
from .experiments import (
    MonteCarloDesign,
    OracleEventsReport,
    RecoveryReport,
    ScenarioConfig,
    StudyResult,
    SweepResult,
    build_instance,
    emit_plot,
    make_equicorrelated_design,
    monte_carlo_oracle_events,
    monte_carlo_recovery,
    run_scenario,
    run_study,
    sample_scenario,
    true_positives,
)
from .linalg import (
    CoefficientVector,
    CovarianceMatrix,
    DesignMatrix,
    ResponseVector,
    SignPattern,
    apply_sign_pattern,
    as_covariance,
    as_matrix,
    as_vector,
    covariance,
    load_matrix_csv,
    load_vector_csv,
    save_matrix_csv,
    save_vector_csv,
    standardize_columns,
)
from .qp import QpResult, active_set_qp, minimize_simplex_qp, project_orthant_l1, project_to_simplex
from .solvers import (
    KktReport,
    NnlsSolution,
    SolverOptions,
    brute_force_nnls,
    lambda_max,
    solve_l1_constrained_nnls,
    solve_nnls,
    solve_oracle_nnls,
    solve_restricted_ols,
    verify_kkt,
)
from .tomography import (
    NetworkTopology,
    TomographyInstance,
    flow_design_matrix,
    generate_network,
    segments_cross,
    simulate_observations,
    toy_instance,
)

__version__ = "0.1.0"

__all__ = [
    "BoundInputs",
    "CoefficientVector",
    "CompatibilityResult",
    "CovarianceMatrix",
    "DesignMatrix",
    "KktReport",
    "MonteCarloDesign",
    "NegativeEntriesResult",
    "NetworkTopology",
    "NnlsSolution",
    "OracleEventsReport",
    "PositiveEigenvalueResult",
    "QpResult",
    "RecoveryReport",
    "ResponseVector",
    "ScenarioConfig",
    "SignPattern",
    "SolverOptions",
    "StudyResult",
    "SweepResult",
    "TomographyInstance",
    "TransferReport",
    "active_set_qp",
    "apply_sign_pattern",
    "as_covariance",
    "as_matrix",
    "as_vector",
    "block_structure_bound",
    "brute_force_nnls",
    "build_instance",
    "coefficient_l1_bound",
    "compatibility_constant_exact",
    "compatibility_lower_bound",
    "covariance",
    "emit_plot",
    "few_negative_entries_bound",
    "flow_design_matrix",
    "gaussian_cdf",
    "gaussian_tail_constant",
    "generate_network",
    "gradient_event_floor",
    "joint_recovery_floor",
    "lambda_max",
    "load_matrix_csv",
    "load_vector_csv",
    "make_equicorrelated_design",
    "min_signal_threshold",
    "minimize_simplex_qp",
    "monte_carlo_oracle_events",
    "monte_carlo_recovery",
    "oracle_coincidence_floor",
    "oracle_prediction_bound",
    "population_transfer",
    "positive_eigenvalue",
    "project_orthant_l1",
    "project_to_simplex",
    "residual_gradient_threshold",
    "run_scenario",
    "run_study",
    "sample_scenario",
    "save_matrix_csv",
    "save_vector_csv",
    "segments_cross",
    "simulate_observations",
    "solve_l1_constrained_nnls",
    "solve_nnls",
    "solve_oracle_nnls",
    "solve_restricted_ols",
    "standardize_columns",
    "strictly_positive_entries_bound",
    "support_recovery_betamin",
    "top_s_support",
    "toy_instance",
    "true_positives",
    "verify_kkt",
]
