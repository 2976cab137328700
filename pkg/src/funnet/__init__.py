"""funnet: scalar-on-function regression with interpretable weights.

A feed-forward network whose first layer integrates each functional
covariate against a basis-expanded functional weight, next to a
roughness-penalized functional linear model, K-fold tuning, and a
simulation harness comparing weight recovery and prediction error.
"""

from .basis import (
    BasisSystem,
    FunctionalCurve,
    LongitudinalSample,
    curve_derivative,
    eval_basis,
    make_bspline_basis,
    make_fourier_basis,
    penalty_matrix,
    smooth_curve,
)
from .backends import available_backends, backend_name
from .dataset import FunctionalDataset, dataset_from_curves
from .errors import (
    ConfigError,
    DataError,
    DomainMismatchError,
    FunnetError,
    NotRecordedError,
    NumericError,
    OutOfDomainError,
    RankError,
    UnderdeterminedError,
    UnsupportedError,
)
from .flm import (
    FlmModel,
    FlmSettings,
    cv_lambda,
    default_lambda_grid,
    fit_flm,
    fit_flm_cv,
    predict_flm,
)
from .funweights import (
    FunctionalWeightEstimate,
    extract_weights,
    imse,
    root_imse,
    scale_aligned_imse,
    weight_trajectory,
)
from .metrics import mep, mspe, r_squared
from .network import (
    AdamState,
    EarlyStopping,
    FnnConfig,
    FnnModel,
    Gradients,
    TrainRecord,
    adam_step,
    forward,
    gradients,
    init_adam_state,
    init_model,
    loss_mse,
    predict,
    sgd_step,
    train,
)
from .quadrature import (
    DEFAULT_GRID_RESOLUTION,
    FeatureTensor,
    QuadratureGrid,
    feature_integrals,
    make_grid,
    simpson,
    simpson_weights,
)
from .simulate import (
    SimResult,
    SimScenario,
    apply_link,
    beta_basis,
    default_flm_settings,
    default_fnn_config,
    gen_beta,
    gen_curves,
    gen_response,
    make_scenario,
    rmspe,
    run_prediction_study,
    run_recovery_study,
)
from .tune import TuneGrid, grid_search, kfold_mspe

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "BasisSystem",
    "ConfigError",
    "DataError",
    "DEFAULT_GRID_RESOLUTION",
    "DomainMismatchError",
    "EarlyStopping",
    "FeatureTensor",
    "FlmModel",
    "FlmSettings",
    "FnnConfig",
    "FnnModel",
    "FunctionalCurve",
    "FunctionalDataset",
    "FunctionalWeightEstimate",
    "FunnetError",
    "Gradients",
    "LongitudinalSample",
    "NotRecordedError",
    "NumericError",
    "OutOfDomainError",
    "QuadratureGrid",
    "RankError",
    "SimResult",
    "SimScenario",
    "TrainRecord",
    "TuneGrid",
    "UnderdeterminedError",
    "UnsupportedError",
    "adam_step",
    "apply_link",
    "available_backends",
    "backend_name",
    "beta_basis",
    "curve_derivative",
    "cv_lambda",
    "dataset_from_curves",
    "default_flm_settings",
    "default_fnn_config",
    "default_lambda_grid",
    "eval_basis",
    "extract_weights",
    "feature_integrals",
    "fit_flm",
    "fit_flm_cv",
    "forward",
    "gen_beta",
    "gen_curves",
    "gen_response",
    "gradients",
    "grid_search",
    "imse",
    "init_adam_state",
    "init_model",
    "kfold_mspe",
    "loss_mse",
    "make_bspline_basis",
    "make_fourier_basis",
    "make_grid",
    "make_scenario",
    "mep",
    "mspe",
    "penalty_matrix",
    "predict",
    "predict_flm",
    "r_squared",
    "rmspe",
    "root_imse",
    "run_prediction_study",
    "run_recovery_study",
    "scale_aligned_imse",
    "sgd_step",
    "simpson",
    "simpson_weights",
    "smooth_curve",
    "train",
    "weight_trajectory",
    "__version__",
]
