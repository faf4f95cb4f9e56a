"""Train/test protocols, RMSE aggregation and feature-importance analyses.

Two protocols: links shuffle-split (repeated 4:1 random splits) and
street-by-street (leave one street out). Every fold fits its scalers,
autoencoder and regressors on that fold's training links only; a
:class:`FoldGuard` checks the row ids handed to each fit.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .autoencoder import Architecture, TrainConfig, train_autoencoder
from .baselines import fit_slope_intercept, gpp_uma_los, gpp_umi_nlos
from .buildings import HeightMap, collapse_buildings, facade_patch, fit_grid_scaler
from .clutter import (CLUTTER4_FEATURES, CLUTTER_FEATURES, FeatureMatrix, assemble_clutter,
                      fit_scaler, prepare_street_clouds)
from .geometry import DenoiseParams
from .regressors import LinearModel, grid_search_cv, rmse
from .scene import Dataset

log = logging.getLogger(__name__)

SHUFFLE_SPLIT = "links_shuffle_split"
STREET_BY_STREET = "street_by_street"
FEATURE_SETS = ("clutter", "clutter_building", "clutter4", "clutter4_building")
BASELINES = ("slope_intercept", "uma_los", "umi_nlos")
DEFAULT_FAMILIES = ("lasso", "elasticnet", "rf", "svr")
TRAIN_FRACTION = 0.8
BIN_WIDTH = 100.0


class LeakageError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# split plans


@dataclass(frozen=True)
class Fold:
    index: int
    label: str
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]

    def __post_init__(self):
        overlap = set(self.train_ids) & set(self.test_ids)
        if overlap:
            raise LeakageError(f"fold {self.index}: {len(overlap)} link(s) in both train and test")
        if not self.train_ids or not self.test_ids:
            raise ValueError(f"fold {self.index}: empty train or test set")


@dataclass(frozen=True)
class SplitPlan:
    protocol: str
    folds: tuple[Fold, ...]
    seed: int | None = None
    iterations: int | None = None

    def __len__(self):
        return len(self.folds)


def plan_links_shuffle_split(dataset: Dataset, iterations: int = 25, seed: int = 0) -> SplitPlan:
    """Each iteration shuffles all links and trains on the first floor(0.8 n)."""
    ids = dataset.link_ids()
    n = len(ids)
    if n < 5:
        raise ValueError(f"shuffle-split needs at least 5 links, got {n}")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    n_train = int(math.floor(TRAIN_FRACTION * n))
    rng = np.random.default_rng(seed)
    folds = []
    for it in range(iterations):
        perm = rng.permutation(n)
        folds.append(Fold(it, f"shuffle{it}", tuple(ids[i] for i in perm[:n_train]),
                          tuple(ids[i] for i in perm[n_train:])))
    return SplitPlan(SHUFFLE_SPLIT, tuple(folds), seed, iterations)


def plan_street_by_street(dataset: Dataset) -> SplitPlan:
    """One fold per street: that street's links are the test set."""
    streets = [sid for sid in dataset.street_ids if dataset.links_for(sid)]
    if len(streets) < 2:
        raise ValueError("street-by-street needs at least 2 streets with links")
    folds = []
    for k, sid in enumerate(streets):
        test = tuple(lk.link_id for lk in dataset.links if lk.street_id == sid)
        train = tuple(lk.link_id for lk in dataset.links if lk.street_id != sid)
        folds.append(Fold(k, sid, train, test))
    return SplitPlan(STREET_BY_STREET, tuple(folds), None, None)


class FoldGuard:
    """Sentinel around every fit: rows must come from the active fold's train set."""

    def __init__(self, fold: Fold):
        self.fold = fold
        self._train = frozenset(fold.train_ids)
        self._test = frozenset(fold.test_ids)
        self.checked = 0

    def admit(self, ids: Sequence[str], what: str = "fit") -> None:
        bad = [i for i in ids if i in self._test or i not in self._train]
        if bad:
            raise LeakageError(f"fold {self.fold.index}: {what} touched {len(bad)} non-training "
                               f"link(s), e.g. {bad[0]!r}")
        self.checked += 1


# ---------------------------------------------------------------------------
# inputs


@dataclass(frozen=True, eq=False)
class PipelineInputs:
    """Per-link features that need no targets: clutter matrix and height maps."""

    dataset: Dataset
    clutter: FeatureMatrix
    height_maps: Mapping[str, HeightMap] = field(default_factory=dict)

    def patches(self, link_ids: Sequence[str]) -> np.ndarray:
        by_id = {lk.link_id: lk for lk in self.dataset.links}
        out = []
        for lid in link_ids:
            lk = by_id[lid]
            if lk.street_id not in self.height_maps:
                raise ValueError(f"no height map for street {lk.street_id!r}")
            out.append(facade_patch(self.height_maps[lk.street_id], lk))
        return np.asarray(out)

    def d3d(self, link_ids: Sequence[str]) -> np.ndarray:
        by_id = {lk.link_id: lk.d3d for lk in self.dataset.links}
        return np.array([by_id[i] for i in link_ids])


def prepare_inputs(dataset: Dataset, denoise: DenoiseParams | None = DenoiseParams(),
                   with_buildings: bool = True) -> PipelineInputs:
    clouds = prepare_street_clouds(dataset, denoise)
    fm = assemble_clutter(dataset, clouds)
    maps = {}
    if with_buildings:
        maps = {sid: collapse_buildings(sc.footprints, sc.meta) for sid, sc in dataset.streets.items()}
    return PipelineInputs(dataset, fm, maps)


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class CustomFamily:
    """A user-supplied regressor: ``fit(X, y, seed)`` returns an object with ``predict``."""

    name: str
    fit: Callable


def _family_name(f) -> str:
    return f.name if isinstance(f, CustomFamily) else str(f)


def latent_columns(n: int) -> tuple[str, ...]:
    return tuple(f"ae{i}" for i in range(n))


def feature_columns(feature_set: str) -> tuple[str, ...]:
    if feature_set not in FEATURE_SETS:
        raise ValueError(f"unknown feature set {feature_set!r}; choose from {FEATURE_SETS}")
    return CLUTTER4_FEATURES if feature_set.startswith("clutter4") else CLUTTER_FEATURES


# ---------------------------------------------------------------------------
# running a protocol


@dataclass
class FoldResult:
    index: int
    label: str
    n_train: int
    test_ids: tuple[str, ...]
    y_test: np.ndarray
    d3d_test: np.ndarray
    rmse: dict = field(default_factory=dict)
    predictions: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)  # linear models: column -> weight
    guard_checks: int = 0


@dataclass
class EvaluationReport:
    protocol: str
    feature_set: str
    columns: tuple[str, ...]
    models: tuple[str, ...]
    folds: list[FoldResult]

    def fold_rmse(self, model: str) -> np.ndarray:
        return np.array([f.rmse[model] for f in self.folds])

    def mean(self, model: str) -> float:
        return float(self.fold_rmse(model).mean())

    def std(self, model: str) -> float:
        return float(self.fold_rmse(model).std())

    def summary(self) -> dict:
        return {m: {"mean": self.mean(m), "std": self.std(m)} for m in self.models}


@dataclass(frozen=True)
class ProtocolSettings:
    families: tuple = DEFAULT_FAMILIES
    feature_set: str = "clutter"
    drop: tuple[str, ...] = ()
    seed: int = 0
    ae_seed: int = 0
    ae_arch: Architecture = Architecture()
    ae_config: TrainConfig = TrainConfig()
    delta: float = 0.5
    epsilon: float = 0.5


def _run_fold(fold: Fold, inputs: PipelineInputs, cfg: ProtocolSettings) -> FoldResult:
    guard = FoldGuard(fold)
    columns = tuple(c for c in feature_columns(cfg.feature_set) if c not in cfg.drop)
    train = inputs.clutter.rows(fold.train_ids).select(columns)
    test = inputs.clutter.rows(fold.test_ids).select(columns)
    y_tr, y_te = train.target, test.target

    if cfg.feature_set.endswith("_building"):
        guard.admit(train.link_ids, "grid scaler")
        tr_patches = inputs.patches(train.link_ids)
        gscaler = fit_grid_scaler(tr_patches)
        guard.admit(train.link_ids, "autoencoder")
        ae = train_autoencoder(gscaler.normalize(tr_patches), cfg.ae_config, cfg.ae_seed,
                               cfg.ae_arch, gscaler)
        z_tr = ae.encode(gscaler.normalize(tr_patches))
        z_te = ae.encode(gscaler.normalize(inputs.patches(test.link_ids)))
        lat = latent_columns(z_tr.shape[1])
        train = train.hstack(FeatureMatrix(z_tr, lat, train.link_ids, train.street_ids))
        test = test.hstack(FeatureMatrix(z_te, lat, test.link_ids, test.street_ids))
        columns = train.columns

    guard.admit(train.link_ids, "standard scaler")
    scaler = fit_scaler(train)
    X_tr, X_te = scaler.transform(train.values), scaler.transform(test.values)

    res = FoldResult(fold.index, fold.label, len(train), test.link_ids, y_te,
                     inputs.d3d(test.link_ids))
    cv_seed = int(np.random.SeedSequence([cfg.seed, fold.index]).generate_state(1)[0])
    for fam in cfg.families:
        name = _family_name(fam)
        guard.admit(train.link_ids, name)
        if isinstance(fam, CustomFamily):
            model, params = fam.fit(X_tr, y_tr, cv_seed), {}
        else:
            found = grid_search_cv(fam, X_tr, y_tr, cv_seed, delta=cfg.delta, epsilon=cfg.epsilon)
            model, params = found.model, found.params
        pred = np.asarray(model.predict(X_te), dtype=np.float64)
        res.predictions[name] = pred
        res.rmse[name] = rmse(y_te, pred)
        res.params[name] = params
        if isinstance(model, LinearModel):
            res.weights[name] = dict(zip(columns, model.weights.tolist()))

    guard.admit(train.link_ids, "slope-intercept")
    si = fit_slope_intercept(inputs.d3d(train.link_ids), y_tr)
    res.params["slope_intercept"] = {"A": si.A, "n": si.n, "sigma": si.sigma}
    for name, pred in (("slope_intercept", si.predict(res.d3d_test)),
                       ("uma_los", gpp_uma_los(res.d3d_test)),
                       ("umi_nlos", gpp_umi_nlos(res.d3d_test))):
        pred = np.asarray(pred, dtype=np.float64).reshape(-1)
        res.predictions[name] = pred
        res.rmse[name] = rmse(y_te, pred)
    res.guard_checks = guard.checked
    return res


def run_protocol(plan: SplitPlan, inputs: PipelineInputs, families=DEFAULT_FAMILIES,
                 feature_set: str = "clutter", drop: Sequence[str] = (), seed: int = 0,
                 ae_seed: int = 0, ae_arch: Architecture = Architecture(),
                 ae_config: TrainConfig = TrainConfig(), delta: float = 0.5,
                 epsilon: float = 0.5, workers: int = 1) -> EvaluationReport:
    """Fit and score every family plus the three baselines on each fold of ``plan``."""
    feature_columns(feature_set)
    unknown = [d for d in drop if d not in inputs.clutter.columns]
    if unknown:
        raise ValueError(f"cannot drop unknown feature(s): {unknown}")
    cfg = ProtocolSettings(tuple(families), feature_set, tuple(drop), seed, ae_seed, ae_arch,
                           ae_config, delta, epsilon)
    if workers > 1 and len(plan.folds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futures = [ex.submit(_run_fold, f, inputs, cfg) for f in plan.folds]
            results = [fu.result() for fu in futures]
    else:
        results = [_run_fold(f, inputs, cfg) for f in plan.folds]
    results.sort(key=lambda r: r.index)
    models = tuple(_family_name(f) for f in families) + BASELINES
    cols = tuple(c for c in feature_columns(feature_set) if c not in drop)
    if feature_set.endswith("_building"):
        cols = cols + latent_columns(ae_arch.latent)
    return EvaluationReport(plan.protocol, feature_set, cols, models, results)


# ---------------------------------------------------------------------------
# analyses


def distance_bin_end(d: float) -> float:
    if not 0 < d <= 5 * BIN_WIDTH:
        raise ValueError(f"distance {d} outside (0, {5 * BIN_WIDTH}]")
    return BIN_WIDTH * math.ceil(d / BIN_WIDTH)


def distance_binned_rmse(report: EvaluationReport, model: str) -> list[tuple[float, float]]:
    """RMSE per 100 m interval of d3d, pooled over all test links of all folds."""
    sq: dict[float, list[float]] = {}
    for f in report.folds:
        err = f.predictions[model] - f.y_test
        for d, e in zip(f.d3d_test.tolist(), err.tolist()):
            sq.setdefault(distance_bin_end(d), []).append(e * e)
    return [(end, float(np.sqrt(np.mean(sq[end])))) for end in sorted(sq)]


@dataclass(frozen=True)
class ImportanceRow:
    feature: str
    mean: float
    min: float
    max: float


def lasso_importance(plan: SplitPlan, inputs: PipelineInputs, seed: int = 0,
                     report: EvaluationReport | None = None) -> list[ImportanceRow]:
    """Lasso weights on standardized Clutter features, aggregated over folds."""
    if report is None:
        report = run_protocol(plan, inputs, ("lasso",), "clutter", seed=seed)
    rows = []
    for col in CLUTTER_FEATURES:
        w = np.array([f.weights["lasso"][col] for f in report.folds])
        rows.append(ImportanceRow(col, float(w.mean()), float(w.min()), float(w.max())))
    return rows


@dataclass(frozen=True)
class AblationRow:
    feature: str
    mean_rmse: float
    delta: float


def leave_one_feature_out(plan: SplitPlan, inputs: PipelineInputs, family="elasticnet",
                          feature_set: str = "clutter", seed: int = 0, workers: int = 1,
                          **kwargs) -> tuple[float, list[AblationRow]]:
    """Mean-RMSE change when each feature is removed in turn; returns (baseline, rows)."""
    name = _family_name(family)
    cols = feature_columns(feature_set)
    if len(cols) < 2:
        raise ValueError("need at least 2 features")
    base = run_protocol(plan, inputs, (family,), feature_set, seed=seed, workers=workers,
                        **kwargs).mean(name)
    rows = []
    for c in cols:
        m = run_protocol(plan, inputs, (family,), feature_set, drop=(c,), seed=seed,
                         workers=workers, **kwargs).mean(name)
        rows.append(AblationRow(c, m, m - base))
    return base, rows


@dataclass(frozen=True)
class BestOfNRow:
    fold: int
    label: str
    average: float
    best: float
    runs: tuple[float, ...]


def best_of_n_ae(plan: SplitPlan, inputs: PipelineInputs, n_runs: int, base_seed: int = 0,
                 family="elasticnet", feature_set: str = "clutter_building", seed: int = 0,
                 workers: int = 1, **kwargs) -> list[BestOfNRow]:
    """Retrain the autoencoder with seeds base_seed .. base_seed+n_runs-1 and score each run."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    if not feature_set.endswith("_building"):
        raise ValueError("best-of-N needs a feature set with building features")
    name = _family_name(family)
    per_run = []
    for r in range(n_runs):
        rep = run_protocol(plan, inputs, (family,), feature_set, seed=seed, ae_seed=base_seed + r,
                           workers=workers, **kwargs)
        per_run.append(rep.fold_rmse(name))
    table = np.array(per_run)  # runs x folds
    return [BestOfNRow(f.index, f.label, float(table[:, k].mean()), float(table[:, k].min()),
                       tuple(table[:, k].tolist()))
            for k, f in enumerate(plan.folds)]


# ---------------------------------------------------------------------------
# emitters


def write_report_csv(report: EvaluationReport, fold_path, predictions_path=None) -> None:
    with open(fold_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fold", "label", "n_train", "n_test", *report.models])
        for f in report.folds:
            w.writerow([f.index, f.label, f.n_train, len(f.test_ids),
                        *(repr(f.rmse[m]) for m in report.models)])
    if predictions_path is not None:
        with open(predictions_path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["fold", "link_id", "d3d", "pl_db", *report.models])
            for f in report.folds:
                for i, lid in enumerate(f.test_ids):
                    w.writerow([f.index, lid, repr(float(f.d3d_test[i])), repr(float(f.y_test[i])),
                                *(repr(float(f.predictions[m][i])) for m in report.models)])


def report_summary(report: EvaluationReport) -> dict:
    return {
        "protocol": report.protocol,
        "feature_set": report.feature_set,
        "columns": list(report.columns),
        "n_folds": len(report.folds),
        "models": report.summary(),
        "folds": [{"index": f.index, "label": f.label, "n_train": f.n_train,
                   "n_test": len(f.test_ids), "rmse": f.rmse, "params": f.params,
                   "weights": f.weights} for f in report.folds],
        "distance_bins": {m: [[e, v] for e, v in distance_binned_rmse(report, m)]
                          for m in report.models},
    }


def write_summary_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
