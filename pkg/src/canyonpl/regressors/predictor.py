"""A fitted regressor paired with the feature scaler it was trained behind."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..clutter import FeatureMatrix, StandardScaler
from ..persist import read_container, write_container
from .forest import ForestModel, Tree
from .linear import LinearModel
from .svr import SvrModel


@dataclass(frozen=True, eq=False)
class TrainedPredictor:
    family: str
    model: object
    scaler: StandardScaler
    columns: tuple[str, ...]
    params: dict

    def predict(self, X) -> np.ndarray:
        if isinstance(X, FeatureMatrix):
            if X.columns != self.columns:
                raise ValueError(f"feature columns {X.columns} differ from trained {self.columns}")
            X = X.values
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} features, got shape {X.shape}")
        return predict(self.model, self.scaler.transform(X))


def predict(model, X) -> np.ndarray:
    out = model.predict(np.asarray(X, dtype=np.float64))
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite prediction")
    return out


def _model_arrays(model):
    if isinstance(model, LinearModel):
        return ({"alpha": model.alpha, "delta": model.delta},
                {"weights": model.weights, "intercept": np.array([model.intercept])})
    if isinstance(model, SvrModel):
        return ({"gamma": model.gamma, "C": model.C, "epsilon": model.epsilon,
                 "n_features": int(model.support_vectors.shape[1]) if model.n_support else 0},
                {"support_vectors": model.support_vectors, "dual_coef": model.dual_coef,
                 "bias": np.array([model.bias])})
    if isinstance(model, ForestModel):
        arrays = {}
        for t, tree in enumerate(model.trees):
            for name in ("feature", "threshold", "left", "right", "value", "n_samples"):
                arrays[f"tree{t}.{name}"] = getattr(tree, name).astype(np.float64)
        return ({"n_trees": len(model.trees), "n_features": model.n_features,
                 "tree_seeds": [int(s) for s in model.tree_seeds]}, arrays)
    raise TypeError(f"cannot persist model of type {type(model).__name__}")


def _model_from_arrays(kind, desc, arrays):
    if kind == "linear":
        return LinearModel(arrays["weights"], float(arrays["intercept"][0]), desc["alpha"], desc["delta"])
    if kind == "svr":
        sv = arrays["support_vectors"].reshape(-1, desc["n_features"]) if desc["n_features"] else np.empty((0, 0))
        return SvrModel(sv, arrays["dual_coef"], float(arrays["bias"][0]), desc["gamma"], desc["C"], desc["epsilon"])
    if kind == "rf":
        trees = []
        for t in range(desc["n_trees"]):
            g = {k: arrays[f"tree{t}.{k}"] for k in ("feature", "threshold", "left", "right", "value", "n_samples")}
            trees.append(Tree(g["feature"].astype(np.int64), g["threshold"], g["left"].astype(np.int64),
                              g["right"].astype(np.int64), g["value"], g["n_samples"].astype(np.int64)))
        return ForestModel(tuple(trees), np.array(desc["tree_seeds"], dtype=np.uint64), desc["n_features"])
    raise ValueError(f"unknown model kind {kind!r}")


def save_predictor(path, pred: TrainedPredictor) -> None:
    desc, arrays = _model_arrays(pred.model)
    kind = {LinearModel: "linear", SvrModel: "svr", ForestModel: "rf"}[type(pred.model)]
    arrays = {**arrays, "scaler.means": pred.scaler.means, "scaler.stds": pred.scaler.stds}
    write_container(path, "predictor", {"family": pred.family, "model_kind": kind, "model": desc,
                                        "columns": list(pred.columns), "params": pred.params}, arrays)


def load_predictor(path) -> TrainedPredictor:
    _, desc, arrays = read_container(path, expect_kind="predictor")
    model = _model_from_arrays(desc["model_kind"], desc["model"], arrays)
    scaler = StandardScaler(arrays["scaler.means"], arrays["scaler.stds"])
    return TrainedPredictor(desc["family"], model, scaler, tuple(desc["columns"]), desc["params"])
