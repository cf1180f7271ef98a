"""Model fitting: regularized linear regression, tree ensembles, validation."""

from .data import MODEL_FEATURES, Dataset, Scaler, load_dataset_csv
from .linear import LinearModel, fit_linear, fit_wls, lasso_lambda_max
from .power import YeoJohnson, yeo_johnson_fit
from .trees import ForestParams, GbmParams, TreeEnsemble, fit_forest, fit_gbm
from .validate import (
    CategoryError,
    Metrics,
    cross_validate,
    evaluate,
    report_error_by_category,
    split_stratified,
)
from .stratified import (
    StratifiedPredictor,
    fit_stratified,
    predict_stratified,
    route_rows,
    routing_disagreement,
)
from .io import load_model, save_model

__all__ = [
    "MODEL_FEATURES",
    "Dataset",
    "Scaler",
    "load_dataset_csv",
    "LinearModel",
    "fit_linear",
    "fit_wls",
    "lasso_lambda_max",
    "YeoJohnson",
    "yeo_johnson_fit",
    "ForestParams",
    "GbmParams",
    "TreeEnsemble",
    "fit_forest",
    "fit_gbm",
    "Metrics",
    "CategoryError",
    "evaluate",
    "cross_validate",
    "split_stratified",
    "report_error_by_category",
    "StratifiedPredictor",
    "fit_stratified",
    "predict_stratified",
    "route_rows",
    "routing_disagreement",
    "save_model",
    "load_model",
]
