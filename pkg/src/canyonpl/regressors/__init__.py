from .forest import ForestModel, Tree, fit_random_forest, fit_tree
from .linear import LinearModel, elasticnet_objective, fit_elasticnet, fit_lasso, soft_threshold
from .predictor import TrainedPredictor, load_predictor, predict, save_predictor
from .search import (DEFAULT_DELTA, FAMILIES, LOG_GRID, SearchResult, candidate_grid, cv_folds,
                     fit_family, grid_search_cv, rmse)
from .svr import DEFAULT_EPSILON, SvrModel, fit_svr, rbf_kernel, solve_svr_dual, svr_dual_objective

__all__ = [
    "ForestModel", "Tree", "fit_random_forest", "fit_tree", "LinearModel", "elasticnet_objective",
    "fit_elasticnet", "fit_lasso", "soft_threshold", "TrainedPredictor", "load_predictor", "predict",
    "save_predictor", "DEFAULT_DELTA", "FAMILIES", "LOG_GRID", "SearchResult", "candidate_grid",
    "cv_folds", "fit_family", "grid_search_cv", "rmse", "DEFAULT_EPSILON", "SvrModel", "fit_svr",
    "rbf_kernel", "solve_svr_dual", "svr_dual_objective",
]
