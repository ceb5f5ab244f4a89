from .model import (
    GbdtConfig,
    GbdtModel,
    Presorted,
    fit,
    fit_rows,
    logistic_grad_hess,
    predict_proba,
    split_gain,
)
from .tuning import DEFAULT_GRID, CvResult, cross_validate, grid_search, pair_folds

__all__ = [
    "GbdtConfig", "GbdtModel", "Presorted", "fit", "fit_rows", "logistic_grad_hess",
    "predict_proba", "split_gain", "DEFAULT_GRID", "CvResult", "cross_validate", "grid_search",
    "pair_folds",
]
