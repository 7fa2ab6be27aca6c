"""Command-line interface.

Subcommands cover the full workflow: ``prepare`` (CSV -> dataset artifact),
``train`` / ``baseline`` (dataset -> checkpoint, history, report),
``evaluate`` (checkpoint + dataset -> metrics report), ``explain``
(importance / dependence / residual / clustering / internal-state
diagnostics), ``augment-preview`` (before/after CSV for one window) and
``sweep`` (learning-curve and feature-ablation tables).

Every artifact is a deterministic function of (config bytes, input bytes,
seed): rerunning a command with identical inputs rewrites identical bytes.
Failures exit with the code carried by the raised error: 2 config,
3 data, 4 numeric, 5 compatibility.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .baselines import NBeatsConfig, TcnConfig
from .checkpoint import (MODEL_KINDS, check_feature_compatibility,
                         load_checkpoint, load_dataset, save_checkpoint,
                         save_dataset, write_csv, write_json)
from .config import RunConfig, load_run_config, validate_report_dict
from .data import TimeSeriesTable, load_csv
from .diagnostics import (kmeans_regimes, occlusion_sensitivity,
                          partial_dependence, permutation_importance,
                          ranking_agreement, residual_diagnostics)
from .errors import CompatibilityError, ConfigError, DataError, ExtremecastError
from .model import wrap_params
from .pipeline import PreparedDataset, prepare
from .training import (HISTORY_COLUMNS, PersistenceConfig, build_model,
                       evaluate_checkpoint, feature_ablation, learning_curve,
                       model_config_from_dict, train)

EXPLAIN_METHODS = ("occlusion", "pdp", "permutation", "residuals", "kmeans",
                   "attention", "states")

SWEEP_KINDS = ("learning-curve", "feature-ablation")


# ------------------------------------------------------------------ helpers


def _resolve_seed(cli_seed, config_doc: dict | None = None,
                  default: int = 0) -> int:
    """--seed beats the config's seed, which beats EXTREMECAST_SEED."""
    if cli_seed is not None:
        return int(cli_seed)
    if config_doc is not None and "seed" in config_doc:
        return int(config_doc["seed"])
    env = os.environ.get("EXTREMECAST_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(
                f"EXTREMECAST_SEED must be an integer, got {env!r}")
    return default


def _load_config(path) -> tuple[RunConfig, dict]:
    cfg = load_run_config(path)
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return cfg, doc


def _sibling(path, suffix: str) -> Path:
    p = Path(path)
    return p.with_name(p.stem + suffix)


def _model_config_for(kind: str, run_cfg: RunConfig, ds: PreparedDataset):
    """Adapt a run config to the dataset's dimensions for the chosen model."""
    if kind == "dual_stream":
        return replace(run_cfg.model, n_features=ds.n_features,
                       lookback=ds.lookback).validate()
    if kind == "tcn":
        return TcnConfig(n_features=ds.n_features,
                         lookback=ds.lookback).validate()
    if kind == "nbeats":
        return NBeatsConfig(lookback=ds.lookback).validate()
    if kind == "persistence":
        return PersistenceConfig()
    raise ConfigError(f"unknown model kind {kind!r}; valid: "
                      + ", ".join(MODEL_KINDS))


def _train_and_save(run_cfg: RunConfig, seed: int, ds: PreparedDataset,
                    kind: str, out) -> tuple:
    train_cfg = replace(run_cfg.training, seed=seed)
    model_cfg = _model_config_for(kind, run_cfg, ds)
    ckpt, state = train(ds, model_cfg, train_cfg)
    save_checkpoint(ckpt, out)
    history_path = _sibling(out, "_history.csv")
    write_csv(history_path, list(HISTORY_COLUMNS),
              [[row[k] for k in HISTORY_COLUMNS] for row in state.history])
    return ckpt, state, history_path


def _write_report(ckpt, ds: PreparedDataset, partition: str, tail_q: float,
                  report_path) -> dict:
    check_feature_compatibility(ckpt, ds.feature_names)
    report = evaluate_checkpoint(ckpt, ds, partition=partition, tail_q=tail_q)
    report["model_kind"] = ckpt.model_kind
    report["best_val_loss"] = ckpt.best_val_loss
    report["partition"] = partition
    validate_report_dict(report)
    write_json(report, report_path)
    residuals_path = _sibling(report_path, "_residuals.csv")
    write_csv(residuals_path, ["date", "y", "yhat", "e"],
              [[r["date"], r["y"], r["yhat"], r["e"]]
               for r in report["residuals"]])
    return report


def _print_metrics(report: dict) -> None:
    m = report["metrics"]
    print(f"partition {report['partition']}: n={report['n_test']}")
    for key in ("rmse", "mae", "r2"):
        print(f"  {key} = {m[key]}")
    print(f"  extreme_high_rmse = {report['extreme_high_rmse']} "
          f"(n={report['n_high']})")
    print(f"  extreme_low_rmse = {report['extreme_low_rmse']} "
          f"(n={report['n_low']})")


def _rebuild_model(ckpt, ds: PreparedDataset):
    model_cfg = model_config_from_dict(ckpt.model_kind, ckpt.model_config)
    model, _ = build_model(model_cfg, ds)
    return model


# --------------------------------------------------------------- subcommands


def cmd_prepare(args) -> int:
    run_cfg, _ = _load_config(args.config)
    csv_path = args.input or run_cfg.dataset.csv_path
    if not csv_path:
        raise ConfigError("no input CSV: pass --input or set dataset.csv_path")
    table = load_csv(csv_path, target=run_cfg.dataset.target)
    ds = prepare(table, lookback=run_cfg.dataset.lookback,
                 train_frac=run_cfg.dataset.train_frac,
                 val_frac=run_cfg.dataset.val_frac,
                 feature_spec=run_cfg.features)
    save_dataset(ds, args.out)
    audit_path = _sibling(args.out, "_audit.csv")
    write_csv(audit_path, ["feature", "group", "corr", "chosen"],
              [list(row) for row in ds.audit])
    print(f"dataset: {ds.split.n_days} days, {ds.n_features} features "
          f"(mode {ds.mode}), lookback {ds.lookback}")
    for name in ("train", "val", "test"):
        print(f"  {name}: {ds.part(name).n_samples} windows")
    print(f"dataset -> {args.out}")
    print(f"feature audit -> {audit_path}")
    return 0


def cmd_train(args) -> int:
    run_cfg, doc = _load_config(args.config)
    seed = _resolve_seed(args.seed, doc)
    ds = load_dataset(args.data)
    ckpt, state, history_path = _train_and_save(
        run_cfg, seed, ds, args.model, args.out)
    print(f"model {ckpt.model_kind}: seed {seed}, "
          f"{state.epoch} epochs ({state.stopped_reason})")
    if ckpt.best_val_loss is not None:
        print(f"  best epoch {ckpt.best_epoch}, "
              f"best val loss {ckpt.best_val_loss}")
    print(f"  wall clock {state.wall_clock_total:.1f}s "
          f"(to best {state.wall_clock_to_best:.1f}s)")
    print(f"checkpoint -> {args.out}")
    print(f"history -> {history_path}")
    return 0


def cmd_evaluate(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data)
    tail_q = 0.05
    if args.config:
        run_cfg, _ = _load_config(args.config)
        tail_q = run_cfg.eval.tail_q
    report = _write_report(ckpt, ds, args.partition, tail_q, args.report)
    _print_metrics(report)
    print(f"report -> {args.report}")
    print(f"residuals -> {_sibling(args.report, '_residuals.csv')}")
    return 0


def cmd_baseline(args) -> int:
    run_cfg, doc = _load_config(args.config)
    seed = _resolve_seed(args.seed, doc)
    ds = load_dataset(args.data)
    ckpt, state, history_path = _train_and_save(
        run_cfg, seed, ds, args.model, args.out)
    report = _write_report(ckpt, ds, "test", run_cfg.eval.tail_q, args.report)
    print(f"baseline {ckpt.model_kind}: seed {seed}, "
          f"{state.epoch} epochs ({state.stopped_reason})")
    _print_metrics(report)
    print(f"checkpoint -> {args.out}")
    print(f"history -> {history_path}")
    print(f"report -> {args.report}")
    return 0


def _explain_sample(ds: PreparedDataset, partition: str, index: int):
    part = ds.part(partition)
    if part.n_samples == 0:
        raise DataError(f"partition {partition!r} has no windows")
    if not 0 <= index < part.n_samples:
        raise DataError(f"sample index {index} out of range "
                        f"[0, {part.n_samples})")
    return part.X[index:index + 1]


def _require_dual_stream(ckpt, method: str) -> None:
    if ckpt.model_kind != "dual_stream":
        raise CompatibilityError(
            f"method {method!r} reads dual-stream internals; "
            f"checkpoint is {ckpt.model_kind!r}")


def cmd_explain(args) -> int:
    if args.method not in EXPLAIN_METHODS:
        raise ConfigError(f"unknown explain method {args.method!r}; valid: "
                          + ", ".join(EXPLAIN_METHODS))
    ckpt = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data)
    check_feature_compatibility(ckpt, ds.feature_names)
    seed = _resolve_seed(args.seed, None, default=ckpt.seed)
    model = _rebuild_model(ckpt, ds)
    out = Path(args.out)

    if args.method == "occlusion":
        result = occlusion_sensitivity(model, ckpt.params, ds,
                                       partition=args.partition)
        write_csv(out, ["feature", "delta_rmse", "occluded_rmse",
                        "baseline_rmse"],
                  [[r["feature"], r["delta_rmse"], r["occluded_rmse"],
                    result["baseline_rmse"]] for r in result["rows"]])
        top = max(result["rows"], key=lambda r: r["delta_rmse"])
        print(f"baseline rmse {result['baseline_rmse']}")
        print(f"most sensitive feature: {top['feature']} "
              f"(delta_rmse {top['delta_rmse']})")
    elif args.method == "pdp":
        if not args.feature:
            raise ConfigError("--feature is required for method 'pdp'")
        result = partial_dependence(model, ckpt.params, ds, args.feature,
                                    grid_size=args.grid_size,
                                    partition=args.partition)
        write_csv(out, ["value", "mean_prediction", "mean_prediction_scaled"],
                  [[g, p, s] for g, p, s in
                   zip(result["grid"], result["mean_prediction"],
                       result["mean_prediction_scaled"])])
        print(f"partial dependence on {args.feature}: "
              f"{len(result['grid'])} grid points")
    elif args.method == "permutation":
        result = permutation_importance(model, ckpt.params, ds,
                                        partition=args.partition,
                                        repeats=args.repeats, seed=seed)
        write_csv(out, ["feature", "mean_drop", "std", "repeats"],
                  [[r["feature"], r["mean_drop"], r["std"], r["repeats"]]
                   for r in result["rows"]])
        occ = occlusion_sensitivity(model, ckpt.params, ds,
                                    partition=args.partition)
        rho = ranking_agreement(occ, result)
        top = max(result["rows"], key=lambda r: r["mean_drop"])
        print(f"top feature: {top['feature']} (mean_drop {top['mean_drop']})")
        print(f"occlusion/permutation ranking agreement (spearman): {rho}")
    elif args.method == "residuals":
        report = evaluate_checkpoint(ckpt, ds, partition=args.partition)
        e = np.array([r["e"] for r in report["residuals"]])
        yhat = np.array([r["yhat"] for r in report["residuals"]])
        diag = residual_diagnostics(e, predictions=yhat)
        write_json(diag, out)
        inside = sum(abs(row["r"]) <= diag["band"] for row in diag["acf"])
        print(f"residuals: n={diag['n']}, mean {diag['mean']:.4f}, "
              f"std {diag['std']:.4f}")
        print(f"acf: {inside}/{len(diag['acf'])} lags inside the "
              f"+/-{diag['band']:.4f} band")
    elif args.method == "kmeans":
        table = TimeSeriesTable(dates=list(ds.dates),
                                columns={ds.target: ds.target_raw.copy()},
                                target=ds.target)
        result = kmeans_regimes(table, k=args.k,
                                feature_names=("year", "month", ds.target),
                                seed=seed)
        write_csv(out, ["date", "cluster"],
                  [[d.isoformat(), int(c)]
                   for d, c in zip(result["dates"], result["assignments"])])
        centroid_path = _sibling(out, "_centroids.csv")
        write_csv(centroid_path, ["cluster", *result["feature_names"]],
                  [[i, *centroid]
                   for i, centroid in enumerate(result["centroids"])])
        sizes = np.bincount(result["assignments"], minlength=args.k)
        print(f"kmeans: k={args.k}, cluster sizes {sizes.tolist()}, "
              f"final wcss {result['wcss_history'][-1]}")
        print(f"centroids -> {centroid_path}")
    elif args.method == "attention":
        _require_dual_stream(ckpt, args.method)
        X = _explain_sample(ds, args.partition, args.sample)
        _, intro = model.forward(wrap_params(ckpt.params, requires_grad=False),
                                 X, train=False)
        attn = intro["attention"][0].mean(axis=0)       # heads -> [L, L]
        write_csv(out, [f"t{j}" for j in range(attn.shape[1])],
                  [list(row) for row in attn])
        print(f"attention map for sample {args.sample}: "
              f"{attn.shape[0]}x{attn.shape[1]} (head-averaged)")
    else:  # states
        _require_dual_stream(ckpt, args.method)
        X = _explain_sample(ds, args.partition, args.sample)
        _, intro = model.forward(wrap_params(ckpt.params, requires_grad=False),
                                 X, train=False)
        P = intro["p"][0]                               # [L, N]
        write_csv(out, [f"state{j}" for j in range(P.shape[1])],
                  [list(row) for row in P])
        trans_path = _sibling(out, "_transition.csv")
        write_csv(trans_path, [f"state{j}" for j in
                               range(intro["transition"].shape[1])],
                  [list(row) for row in intro["transition"]])
        print(f"state probabilities for sample {args.sample}: "
              f"{P.shape[0]} steps x {P.shape[1]} states")
        print(f"transition matrix -> {trans_path}")
    print(f"output -> {out}")
    return 0


def cmd_augment_preview(args) -> int:
    from .augment import augment_windows

    run_cfg, doc = _load_config(args.config)
    seed = _resolve_seed(args.seed, doc)
    ds = load_dataset(args.data)
    part = ds.part("train")
    if part.n_samples == 0:
        raise DataError("training partition has no windows")
    if not 0 <= args.sample < part.n_samples:
        raise DataError(f"sample index {args.sample} out of range "
                        f"[0, {part.n_samples})")
    X1 = part.X[args.sample:args.sample + 1]
    y1 = part.y[args.sample:args.sample + 1]
    cfg = replace(run_cfg.augment, enabled=True)
    X4, y4 = augment_windows(X1, y1, seed, cfg)
    variants = ("original", "jitter", "scale", "warp")
    rows = []
    for v, name in enumerate(variants):
        for t in range(X4.shape[1]):
            rows.append([name, t, *X4[v, t, :], y4[v]])
    write_csv(args.out, ["variant", "t", *ds.feature_names, "y"], rows)
    print(f"augment preview: sample {args.sample}, seed {seed}, "
          f"{X4.shape[1]} steps x {ds.n_features} features x "
          f"{len(variants)} variants")
    print(f"output -> {args.out}")
    return 0


def cmd_sweep(args) -> int:
    run_cfg, doc = _load_config(args.config)
    seed = _resolve_seed(args.seed, doc)
    train_cfg = replace(run_cfg.training, seed=seed)
    if args.kind == "learning-curve":
        if not args.data:
            raise ConfigError("learning-curve sweep needs --data")
        ds = load_dataset(args.data)
        model_cfg = _model_config_for(args.model, run_cfg, ds)
        rows = learning_curve(ds, model_cfg, train_cfg, csv_path=args.out)
    else:  # feature-ablation
        csv_path = args.input or run_cfg.dataset.csv_path
        if not csv_path:
            raise ConfigError("feature-ablation sweep needs --input "
                              "or dataset.csv_path")
        table = load_csv(csv_path, target=run_cfg.dataset.target)
        # feature_ablation re-fits per mode and adapts n_features/lookback
        # on the config itself, so no dataset probe is needed here
        base_configs = {"dual_stream": run_cfg.model, "tcn": TcnConfig(),
                        "nbeats": NBeatsConfig(),
                        "persistence": PersistenceConfig()}
        rows = feature_ablation(table, base_configs[args.model], train_cfg,
                                lookback=run_cfg.dataset.lookback,
                                train_frac=run_cfg.dataset.train_frac,
                                val_frac=run_cfg.dataset.val_frac,
                                feature_spec=run_cfg.features,
                                csv_path=args.out)
    for row in rows:
        head = list(row.items())[:4]
        print("  " + ", ".join(f"{k}={v}" for k, v in head))
    print(f"sweep ({args.kind}) -> {args.out}")
    return 0


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extremecast",
        description="Deterministic extreme-aware temperature forecasting.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="build a dataset artifact from a CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--input", default=None, help="raw CSV (default: "
                   "dataset.csv_path from the config)")
    p.add_argument("--out", required=True, help="dataset JSON to write")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a model on a prepared dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True, help="dataset JSON from prepare")
    p.add_argument("--out", required=True, help="checkpoint JSON to write")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--model", default="dual_stream", choices=MODEL_KINDS)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", required=True, help="report JSON to write")
    p.add_argument("--partition", default="test",
                   choices=("train", "val", "test"))
    p.add_argument("--config", default=None,
                   help="optional run config (sets eval.tail_q)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline",
                       help="train a reference model and report in one step")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, choices=MODEL_KINDS)
    p.add_argument("--out", required=True, help="checkpoint JSON to write")
    p.add_argument("--report", required=True, help="report JSON to write")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("explain", help="model and residual diagnostics")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--method", required=True,
                   help="one of: " + ", ".join(EXPLAIN_METHODS))
    p.add_argument("--out", required=True)
    p.add_argument("--partition", default="test",
                   choices=("train", "val", "test"))
    p.add_argument("--feature", default=None, help="feature name (pdp)")
    p.add_argument("--sample", type=int, default=0,
                   help="window index (attention, states)")
    p.add_argument("--k", type=int, default=4, help="cluster count (kmeans)")
    p.add_argument("--repeats", type=int, default=5,
                   help="shuffle repeats (permutation)")
    p.add_argument("--grid-size", type=int, default=20,
                   help="grid points (pdp)")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("augment-preview",
                       help="before/after CSV for one training window")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sample", type=int, default=0)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_augment_preview)

    p = sub.add_parser("sweep",
                       help="learning-curve or feature-ablation table")
    p.add_argument("--config", required=True)
    p.add_argument("--kind", required=True, choices=SWEEP_KINDS)
    p.add_argument("--data", default=None,
                   help="dataset JSON (learning-curve)")
    p.add_argument("--input", default=None, help="raw CSV (feature-ablation)")
    p.add_argument("--out", required=True, help="CSV to write")
    p.add_argument("--model", default="dual_stream", choices=MODEL_KINDS)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ExtremecastError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
