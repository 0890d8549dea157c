"""Boosting with robust logistic-regression members under label noise."""

from .boosting import (
    BoostConfig,
    Ensemble,
    GammaMode,
    SampleWeightTable,
    effective_weights,
    init_sample_weights,
    predict_ensemble,
    rboost_loss,
    run_adaboost,
    run_rboost,
    solve_alpha,
    stepwise_loss,
    update_sample_weights,
    weighted_error,
)
from .calibration import (
    LOGISTIC,
    PlattModel,
    calibrate,
    estimate_gamma,
    fit_platt,
    gamma_objective,
    trusted_calibration,
    update_gamma,
)
from .dataset import (
    Dataset,
    FlipMatrix,
    NoiseSpec,
    generate_banana,
    generate_two_gaussians,
    holdout,
    inject_label_noise,
    load_csv,
    split,
)
from .errors import (
    DegenerateFitError,
    DegenerateUpdateError,
    ParseError,
    SchemaError,
    StratificationError,
)
from .robust_lr import (
    FitConfig,
    RobustLinearModel,
    fit_robust_lr,
    log_likelihood_gradient,
    noisy_posterior,
    plain_lr_config,
    predict,
    update_omega,
    weighted_log_likelihood,
)

__version__ = "0.1.0"
