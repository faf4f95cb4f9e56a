"""Command-line entry point: ``canyonpl <subcommand> [options]``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Every option can also be given in a JSON file passed with ``--config``; keys
are the option names with dashes replaced by underscores, and flags given on
the command line take precedence.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import evaluation as ev
from .autoencoder import Architecture, TrainConfig, load_autoencoder, save_autoencoder, train_autoencoder
from .buildings import collapse_buildings, facade_patch, fit_grid_scaler
from .clutter import (CLUTTER4_FEATURES, FeatureMatrix, fit_scaler, load_features, save_features)
from .geometry import DenoiseParams
from .plots import box_plot_svg, scatter_svg, weight_bars_svg, write_svg
from .regressors import FAMILIES, TrainedPredictor, grid_search_cv, save_predictor
from .scene import load_dataset
from .synth import GroundTruthPL, SceneConfig, generate_pl, generate_scene, write_scene

log = logging.getLogger("canyonpl")

PROTOCOLS = {"street-by-street": ev.STREET_BY_STREET, "shuffle-split": ev.SHUFFLE_SPLIT}
COMMON = {"config", "workers", "verbose", "command"}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers


def _workers(args) -> int:
    w = args.workers
    if w is None:
        env = os.environ.get("CANYONPL_WORKERS")
        try:
            w = int(env) if env else 1
        except ValueError:
            raise UsageError(f"CANYONPL_WORKERS must be an integer, got {env!r}") from None
    if w < 1:
        raise UsageError("workers must be >= 1")
    return w


def _families(text: str) -> tuple[str, ...]:
    fams = tuple(f.strip() for f in text.split(",") if f.strip())
    bad = [f for f in fams if f not in FAMILIES]
    if bad or not fams:
        raise UsageError(f"unknown model family {bad or text!r}; choose from {', '.join(FAMILIES)}")
    return fams


def _denoise(args) -> DenoiseParams | None:
    if args.denoise_k == 0:
        return None
    try:
        return DenoiseParams(args.denoise_k, args.denoise_alpha)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_scenes(path):
    if not os.path.isdir(path):
        raise UsageError(f"scene directory not found: {path}")
    return load_dataset(path)


def _ae_config(args) -> TrainConfig:
    if args.ae_epochs < 1 or args.ae_batch_size < 1:
        raise UsageError("autoencoder epochs and batch size must be >= 1")
    return TrainConfig(epochs=args.ae_epochs, batch_size=args.ae_batch_size)


def _patches(dataset, links):
    maps = {sid: collapse_buildings(sc.footprints, sc.meta) for sid, sc in dataset.streets.items()}
    return np.asarray([facade_patch(maps[lk.street_id], lk) for lk in links])


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    if args.streets < 1:
        raise UsageError("--streets must be >= 1")
    try:
        cfg = SceneConfig(n_streets=args.streets,
                          length_range=(args.length_min, args.length_max),
                          density_range=(args.density_min, args.density_max),
                          links_range=(args.links_min, args.links_max))
        truth = GroundTruthPL(A=args.A, n=args.n, beta_street=args.beta_street,
                             beta_link=args.beta_link, gamma_canyon=args.gamma_canyon,
                             noise_sigma=args.noise_sigma, saturation_db=args.saturation_db)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    dataset, _ = generate_scene(cfg, args.seed)
    inputs = ev.prepare_inputs(dataset, _denoise(args), with_buildings=False)
    dataset = generate_pl(dataset, inputs.clutter, truth, args.seed)
    write_scene(args.out, dataset, truth, cfg, args.seed)
    print(f"wrote {len(dataset.streets)} streets, {len(dataset.links)} links to {args.out}")
    return 0


def cmd_featurize(args) -> int:
    fs = args.feature_set
    if fs not in ev.FEATURE_SETS:
        raise UsageError(f"unknown feature set {fs!r}")
    building = fs.endswith("_building")
    if building and not args.ae:
        raise UsageError(f"feature set {fs} needs a trained autoencoder (--ae)")
    if building and not os.path.isfile(args.ae):
        raise UsageError(f"autoencoder model not found: {args.ae}")
    dataset = _load_scenes(args.scenes)
    inputs = ev.prepare_inputs(dataset, _denoise(args), with_buildings=False)
    fm = inputs.clutter
    if fs.startswith("clutter4"):
        fm = fm.select(CLUTTER4_FEATURES)
    if building:
        ae = load_autoencoder(args.ae)
        if ae.scaler is None:
            raise UsageError("autoencoder model carries no grid scaler")
        z = ae.encode(ae.scaler.normalize(_patches(dataset, dataset.links)))
        fm = fm.hstack(FeatureMatrix(z, ev.latent_columns(z.shape[1]), fm.link_ids, fm.street_ids))
    save_features(args.out, fm)
    print(f"wrote {len(fm)} rows x {len(fm.columns)} features to {args.out}")
    return 0


def cmd_train_ae(args) -> int:
    dataset = _load_scenes(args.scenes)
    links = dataset.links
    if args.streets:
        keep = set(args.streets.split(","))
        unknown = keep - set(dataset.street_ids)
        if unknown:
            raise UsageError(f"unknown street id(s): {sorted(unknown)}")
        links = [lk for lk in links if lk.street_id in keep]
    patches = _patches(dataset, links)
    scaler = fit_grid_scaler(patches)
    model = train_autoencoder(scaler.normalize(patches), _ae_config(args), args.seed, Architecture(), scaler)
    save_autoencoder(args.out, model)
    print(f"trained on {len(patches)} patches; final loss {model.train_loss[-1]:.6g}; saved {args.out}")
    return 0


def cmd_train(args) -> int:
    if args.family not in FAMILIES:
        raise UsageError(f"unknown model family {args.family!r}")
    if not os.path.isfile(args.features):
        raise UsageError(f"feature file not found: {args.features}")
    fm = load_features(args.features)
    if fm.target is None:
        raise UsageError("feature file has no pl_db target column")
    scaler = fit_scaler(fm)
    found = grid_search_cv(args.family, scaler.transform(fm.values), fm.target, args.seed,
                           delta=args.delta, epsilon=args.epsilon)
    pred = TrainedPredictor(args.family, found.model, scaler, fm.columns, found.params)
    save_predictor(args.out, pred)
    print(f"{args.family}: params {found.params}, cv RMSE {found.score:.4f} dB; saved {args.out}")
    return 0


def _plan(args, dataset):
    if args.protocol not in PROTOCOLS:
        raise UsageError(f"unknown protocol {args.protocol!r}; choose from {', '.join(PROTOCOLS)}")
    if PROTOCOLS[args.protocol] == ev.STREET_BY_STREET:
        return ev.plan_street_by_street(dataset)
    if args.iterations < 1:
        raise UsageError("--iterations must be >= 1")
    return ev.plan_links_shuffle_split(dataset, args.iterations, args.seed)


def cmd_evaluate(args) -> int:
    fams = _families(args.families)
    if args.feature_set not in ev.FEATURE_SETS:
        raise UsageError(f"unknown feature set {args.feature_set!r}")
    workers = _workers(args)
    if "svr" in fams:
        log.warning("svr grid search fits 405 models per fold; expect long runtimes on large datasets")
    dataset = _load_scenes(args.scenes)
    plan = _plan(args, dataset)
    building = args.feature_set.endswith("_building")
    inputs = ev.prepare_inputs(dataset, _denoise(args), with_buildings=building)
    os.makedirs(args.out, exist_ok=True)
    kw = dict(seed=args.seed, ae_config=_ae_config(args), delta=args.delta,
              epsilon=args.epsilon, workers=workers)
    report = ev.run_protocol(plan, inputs, fams, args.feature_set, ae_seed=args.ae_seed, **kw)
    ev.write_report_csv(report, os.path.join(args.out, "folds.csv"),
                        os.path.join(args.out, "predictions.csv"))
    summary = ev.report_summary(report)
    with open(os.path.join(args.out, "distance_bins.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "bin_end_m", "rmse_db"])
        for m in report.models:
            for end, v in ev.distance_binned_rmse(report, m):
                w.writerow([m, repr(end), repr(v)])
    if building and args.ae_runs > 1:
        rows = ev.best_of_n_ae(plan, inputs, args.ae_runs, args.ae_seed, fams[0], args.feature_set, **kw)
        summary["best_of_n_ae"] = {"family": fams[0], "n_runs": args.ae_runs,
                                   "folds": [r.__dict__ for r in rows]}
    ev.write_summary_json(os.path.join(args.out, "summary.json"), summary)
    for m, s in report.summary().items():
        print(f"{m:16s} {s['mean']:7.3f} +/- {s['std']:.3f} dB over {len(report.folds)} folds")
    return 0


def cmd_importance(args) -> int:
    fams = _families(args.family)
    dataset = _load_scenes(args.scenes)
    plan = _plan(args, dataset)
    inputs = ev.prepare_inputs(dataset, _denoise(args), with_buildings=False)
    workers = _workers(args)
    os.makedirs(args.out, exist_ok=True)
    imp = ev.lasso_importance(plan, inputs, args.seed)
    base, abl = ev.leave_one_feature_out(plan, inputs, fams[0], "clutter", args.seed, workers)
    with open(os.path.join(args.out, "lasso_importance.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "mean", "min", "max"])
        for r in imp:
            w.writerow([r.feature, repr(r.mean), repr(r.min), repr(r.max)])
    with open(os.path.join(args.out, "leave_one_out.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "mean_rmse", "delta_rmse"])
        for r in abl:
            w.writerow([r.feature, repr(r.mean_rmse), repr(r.delta)])
    ev.write_summary_json(os.path.join(args.out, "importance.json"), {
        "protocol": plan.protocol, "family": fams[0], "baseline_rmse": base,
        "lasso": [r.__dict__ for r in imp], "leave_one_out": [r.__dict__ for r in abl]})
    for r in imp:
        print(f"{r.feature:20s} w={r.mean:+.3f} [{r.min:+.3f}, {r.max:+.3f}]")
    return 0


def _read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def cmd_report(args) -> int:
    folds_path = os.path.join(args.input, "folds.csv")
    preds_path = os.path.join(args.input, "predictions.csv")
    if not (os.path.isfile(folds_path) and os.path.isfile(preds_path)):
        raise UsageError(f"{args.input} does not hold evaluate output (folds.csv, predictions.csv)")
    os.makedirs(args.out, exist_ok=True)
    folds = _read_csv(folds_path)
    models = [c for c in folds[0] if c not in ("fold", "label", "n_train", "n_test")]
    rows = [(m, [float(r[m]) for r in folds]) for m in models]
    write_svg(os.path.join(args.out, "rmse_box.svg"), box_plot_svg(rows))
    means = {m: float(np.mean(v)) for m, v in rows}
    model = args.model or min(means, key=means.get)
    if model not in models:
        raise UsageError(f"model {model!r} not in report; have {models}")
    preds = _read_csv(preds_path)
    write_svg(os.path.join(args.out, "scatter.svg"),
              scatter_svg([float(r["pl_db"]) for r in preds], [float(r[model]) for r in preds],
                          f"Measured vs predicted path loss ({model})"))
    out = {"models": {m: {"mean": float(np.mean(v)), "std": float(np.std(v)), "folds": len(v)}
                      for m, v in rows},
           "scatter_model": model, "n_test_links": len(preds)}
    imp_path = os.path.join(args.input, "lasso_importance.csv")
    if os.path.isfile(imp_path):
        imp = [(r["feature"], float(r["mean"]), float(r["min"]), float(r["max"])) for r in _read_csv(imp_path)]
        write_svg(os.path.join(args.out, "weights.svg"), weight_bars_svg(imp))
        out["weights"] = {name: mean for name, mean, _, _ in imp}
    ev.write_summary_json(os.path.join(args.out, "report.json"), out)
    print(f"wrote figures to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_denoise(p):
    p.add_argument("--denoise-k", type=int, default=16, help="k-NN neighbours (0 disables denoising)")
    p.add_argument("--denoise-alpha", type=float, default=2.0)


def _add_ae(p):
    p.add_argument("--ae-epochs", type=int, default=100)
    p.add_argument("--ae-batch-size", type=int, default=16)


def _add_protocol(p):
    p.add_argument("--protocol", default="street-by-street", help="street-by-street | shuffle-split")
    p.add_argument("--iterations", type=int, default=25)


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="canyonpl", description="Street-canyon path-loss prediction pipeline")
    top.add_argument("-v", "--verbose", action="store_true")
    sub = top.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file with option values")
        p.add_argument("--workers", type=int, default=None, help="parallel folds (default CANYONPL_WORKERS or 1)")
        p.add_argument("--seed", type=int, default=0)
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "generate synthetic scenes")
    p.add_argument("--streets", type=int, default=13)
    p.add_argument("--out", required=True)
    p.add_argument("--length-min", type=float, default=100.0)
    p.add_argument("--length-max", type=float, default=250.0)
    p.add_argument("--density-min", type=float, default=0.5)
    p.add_argument("--density-max", type=float, default=5.0)
    p.add_argument("--links-min", type=int, default=49)
    p.add_argument("--links-max", type=int, default=131)
    p.add_argument("--A", type=float, default=46.9)
    p.add_argument("--n", type=float, default=3.1)
    p.add_argument("--beta-street", type=float, default=2.0)
    p.add_argument("--beta-link", type=float, default=0.02)
    p.add_argument("--gamma-canyon", type=float, default=-3.0)
    p.add_argument("--noise-sigma", type=float, default=3.0)
    p.add_argument("--saturation-db", type=float, default=0.0)
    _add_denoise(p)

    p = add("featurize", cmd_featurize, "write a feature CSV for a scene directory")
    p.add_argument("--scenes", required=True)
    p.add_argument("--feature-set", default="clutter")
    p.add_argument("--ae", help="trained autoencoder (needed for *_building sets)")
    p.add_argument("--out", required=True)
    _add_denoise(p)

    p = add("train-ae", cmd_train_ae, "train the facade autoencoder")
    p.add_argument("--scenes", required=True)
    p.add_argument("--streets", help="comma-separated street ids to train on (default all)")
    p.add_argument("--out", required=True)
    _add_ae(p)

    p = add("train", cmd_train, "grid-search and fit one regressor on a feature CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--family", default="elasticnet")
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--out", required=True)

    p = add("evaluate", cmd_evaluate, "run a train/test protocol")
    p.add_argument("--scenes", required=True)
    _add_protocol(p)
    p.add_argument("--feature-set", default="clutter")
    p.add_argument("--families", default="lasso,elasticnet,rf")
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--ae-seed", type=int, default=0)
    p.add_argument("--ae-runs", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_ae(p)
    _add_denoise(p)

    p = add("importance", cmd_importance, "Lasso weights and leave-one-feature-out")
    p.add_argument("--scenes", required=True)
    _add_protocol(p)
    p.add_argument("--family", default="elasticnet")
    p.add_argument("--out", required=True)
    _add_denoise(p)

    p = add("report", cmd_report, "render SVG figures from evaluate output")
    p.add_argument("--input", required=True)
    p.add_argument("--model", help="model for the scatter plot (default: lowest mean RMSE)")
    p.add_argument("--out", required=True)
    return top


def _apply_config(parser, argv):
    """Re-parse with JSON config values as defaults; unknown keys are a usage error."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions} - {"help", "config"}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
    sub.set_defaults(**cfg)
    args = parser.parse_args(argv)
    missing = [a.dest for a in sub._actions if getattr(a, "was_required", a.required)
               and getattr(args, a.dest, None) is None]
    if missing:
        raise UsageError(f"missing option(s): {missing}")
    return args


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    # required options may come from the config file, so relax them for parsing
    if "--config" in argv:
        for sub in parser._subparsers._group_actions[0].choices.values():
            for a in sub._actions:
                a.was_required, a.required = a.required, False
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"canyonpl: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"canyonpl: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report and fail
        log.debug("failure", exc_info=True)
        print(f"canyonpl: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
