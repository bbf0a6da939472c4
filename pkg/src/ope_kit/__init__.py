"""Off-policy evaluation for contextual bandits.

Policy-value estimators (direct method, simple and inverse-propensity
weighting, doubly robust, and the spline-based nonparametric weighting
pair), synthetic and classification-derived benchmarks, and a reproducible
Monte Carlo harness with CSV/TSV/SVG reporting.
"""

from .errors import (
    EmptyInput,
    InvalidOrder,
    MissingFullPropensities,
    NonConvergenceWarning,
    OpeKitError,
    ParseError,
    SchemaMismatch,
    ShapeMismatch,
    SingularSystem,
    SizeTooLarge,
    TooFewPoints,
    ZeroPropensity,
    ZeroWeightMass,
)
from .spline import (
    DEFAULT_LAMBDA_GRID,
    KnotVector,
    SplineFit,
    SplineSpec,
    basis_matrix,
    build_knots,
    default_segments,
    difference_penalty,
    eval_basis,
    fit_pspline,
    gcv_score,
    predict,
)
from .estimators import (
    PROPENSITY_FLOOR,
    EstimateResult,
    LoggedBanditData,
    PolicyMatrix,
    RewardPredictions,
    dm,
    dr,
    floor_propensities,
    ipw,
    mnw,
    nw,
    sw,
)
from .synthetic import (
    SCENARIOS,
    SyntheticProblem,
    gen_example1,
    gen_example2,
    gen_toy,
    sample_actions,
    sorted_uniform_propensities,
    true_value,
)
from .models import (
    Classifier,
    RidgeModel,
    fit_multinomial_logistic,
    fit_ridge_per_action,
    predict_proba,
    predict_rewards,
    predict_scores,
    to_deterministic_policy,
)
from .harness import (
    LOGGING_MODES,
    ClassificationData,
    DatasetSchema,
    EstimatorStats,
    EvalSummary,
    RepetitionRecord,
    RunConfig,
    display_estimator_tag,
    draw_noisy_losses,
    estimate_logging,
    load_dataset,
    make_logging_policy,
    parse_estimator_tag,
    perturb_logging,
    resolve_threads,
    run_monte_carlo,
    sample_size_sweep,
    split_train_test,
)
from .reporting import (
    ReportRow,
    SweepRow,
    format_number,
    read_report,
    read_sweep,
    render_sweep_svg,
    rows_from_summary,
    sweep_rows,
    write_report,
)
from .cli import run_cli

__version__ = "0.1.0"

__all__ = [
    "ClassificationData",
    "Classifier",
    "DEFAULT_LAMBDA_GRID",
    "DatasetSchema",
    "EmptyInput",
    "EstimateResult",
    "EstimatorStats",
    "EvalSummary",
    "InvalidOrder",
    "KnotVector",
    "LOGGING_MODES",
    "LoggedBanditData",
    "MissingFullPropensities",
    "NonConvergenceWarning",
    "OpeKitError",
    "PROPENSITY_FLOOR",
    "ParseError",
    "PolicyMatrix",
    "RepetitionRecord",
    "ReportRow",
    "RewardPredictions",
    "RidgeModel",
    "RunConfig",
    "SCENARIOS",
    "SchemaMismatch",
    "ShapeMismatch",
    "SingularSystem",
    "SizeTooLarge",
    "SplineFit",
    "SplineSpec",
    "SweepRow",
    "SyntheticProblem",
    "TooFewPoints",
    "ZeroPropensity",
    "ZeroWeightMass",
    "basis_matrix",
    "build_knots",
    "default_segments",
    "difference_penalty",
    "display_estimator_tag",
    "dm",
    "dr",
    "draw_noisy_losses",
    "estimate_logging",
    "eval_basis",
    "fit_multinomial_logistic",
    "fit_pspline",
    "fit_ridge_per_action",
    "floor_propensities",
    "format_number",
    "gcv_score",
    "gen_example1",
    "gen_example2",
    "gen_toy",
    "ipw",
    "load_dataset",
    "make_logging_policy",
    "mnw",
    "nw",
    "parse_estimator_tag",
    "perturb_logging",
    "predict",
    "predict_proba",
    "predict_rewards",
    "predict_scores",
    "read_report",
    "read_sweep",
    "render_sweep_svg",
    "resolve_threads",
    "rows_from_summary",
    "run_cli",
    "run_monte_carlo",
    "sample_actions",
    "sample_size_sweep",
    "sorted_uniform_propensities",
    "split_train_test",
    "sw",
    "sweep_rows",
    "to_deterministic_policy",
    "true_value",
    "write_report",
]
