"""5-fold grid-search cross-validation over the log-spaced hyperparameter grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forest import fit_random_forest
from .linear import fit_elasticnet, fit_lasso
from .svr import DEFAULT_EPSILON, fit_svr

LOG_GRID = tuple(10.0 ** k for k in range(-4, 5))
FAMILIES = ("lasso", "elasticnet", "rf", "svr")
DEFAULT_DELTA = 0.5


def rmse(y, y_hat) -> float:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    y_hat = np.asarray(y_hat, dtype=np.float64).reshape(-1)
    if len(y) == 0 or len(y) != len(y_hat):
        raise ValueError("rmse needs two equal-length, non-empty vectors")
    d = y - y_hat
    return float(np.sqrt(np.mean(d * d)))


def fit_family(family: str, X, y, params: dict, seed: int = 0, delta: float = DEFAULT_DELTA,
               epsilon: float = DEFAULT_EPSILON):
    if family == "lasso":
        return fit_lasso(X, y, params["alpha"])
    if family == "elasticnet":
        return fit_elasticnet(X, y, params["alpha"], delta)
    if family == "rf":
        return fit_random_forest(X, y, seed)
    if family == "svr":
        return fit_svr(X, y, params["C"], params["gamma"], epsilon)
    raise ValueError(f"unknown model family {family!r}")


def candidate_grid(family: str, grid=LOG_GRID) -> list[dict]:
    """Candidates ordered from strongest to weakest regularization.

    The first candidate wins ties: larger alpha, then smaller C and smaller gamma.
    """
    if family in ("lasso", "elasticnet"):
        return [{"alpha": a} for a in sorted(grid, reverse=True)]
    if family == "svr":
        return [{"C": c, "gamma": g} for c in sorted(grid) for g in sorted(grid)]
    if family == "rf":
        return [{}]
    raise ValueError(f"unknown model family {family!r}")


def cv_folds(n: int, seed: int, n_folds: int = 5) -> list[np.ndarray]:
    """Contiguous chunks of a seeded permutation of the row indices."""
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, n_folds)


@dataclass
class SearchResult:
    family: str
    params: dict
    score: float
    model: object
    table: list = field(default_factory=list)  # (params, mean validation RMSE)


def grid_search_cv(family: str, X, y, seed: int = 0, grid=LOG_GRID, n_folds: int = 5,
                   delta: float = DEFAULT_DELTA, epsilon: float = DEFAULT_EPSILON) -> SearchResult:
    """Pick hyperparameters by mean validation RMSE, then refit on all rows."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = len(y)
    if n < n_folds:
        raise ValueError(f"grid search needs at least {n_folds} rows, got {n}")
    candidates = candidate_grid(family, grid)
    if len(candidates) == 1:
        model = fit_family(family, X, y, candidates[0], seed, delta, epsilon)
        return SearchResult(family, candidates[0], float("nan"), model, [])
    folds = cv_folds(n, seed, n_folds)
    table = []
    best = None
    for params in candidates:
        errs = []
        for k, val in enumerate(folds):
            tr = np.concatenate([f for i, f in enumerate(folds) if i != k])
            m = fit_family(family, X[tr], y[tr], params, seed, delta, epsilon)
            errs.append(rmse(y[val], m.predict(X[val])))
        score = float(np.mean(errs))
        table.append((params, score))
        if best is None or score < best[1]:
            best = (params, score)
    model = fit_family(family, X, y, best[0], seed, delta, epsilon)
    return SearchResult(family, best[0], best[1], model, table)
