"""Training loop and ablation sweeps.

Each epoch shuffles the training windows (stream "shuffle"), iterates
mini-batches (final partial batch kept only with >= 2 samples, since the
extreme loss takes in-batch quantiles), runs forward → loss → backward →
global-norm clip → AdamW with a cosine warm-restart learning rate, then
scores the full validation partition in eval mode with the same loss.
Training stops after ``patience`` epochs without strict validation
improvement (or at ``max_epochs``) and returns the best epoch's parameters.

``learning_curve`` retrains on the chronologically latest fraction of the
training partition — the windows nearest the evaluation boundary — and
``feature_ablation`` rebuilds the dataset per feature mode with identical
seeds.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import tensor as T
from .augment import AugmentConfig, augment_windows
from .baselines import (NBeatsConfig, NBeatsModel, PersistenceModel,
                        TcnConfig, TcnModel)
from .checkpoint import Checkpoint
from .errors import ConfigError, DataError, NumericError
from .losses import LossConfig, compute_loss
from .metrics import evaluation_report
from .model import DualStreamModel, ModelConfig, predict, wrap_params
from .optim import (AdamWState, OptimConfig, adamw_step, clip_global_norm,
                    cosine_warm_restart_lr)
from .pipeline import PreparedDataset, prepare
from .rng import Rng

HISTORY_COLUMNS = ("epoch", "train_loss", "val_loss", "lr")
LEARNING_CURVE_FRACTIONS = (0.2, 0.4, 0.6, 0.8, 1.0)
FEATURE_MODES = ("full", "minimal", "raw_only")


@dataclass
class PersistenceConfig:
    """The persistence forecaster has no learnable parameters."""


@dataclass
class TrainConfig:
    batch_size: int = 64
    max_epochs: int = 300
    patience: int = 25
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    train_fraction: float = 1.0
    feature_mode: str = "full"

    def validate(self) -> "TrainConfig":
        if self.batch_size < 2:
            raise ConfigError("training.batch_size must be >= 2")
        if self.patience < 1:
            raise ConfigError("training.patience must be >= 1")
        if self.max_epochs < 1:
            raise ConfigError("training.max_epochs must be >= 1")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ConfigError("training.train_fraction must be in (0, 1]")
        if self.feature_mode not in FEATURE_MODES:
            raise ConfigError(
                f"training.feature_mode must be one of {FEATURE_MODES}")
        return self


@dataclass
class TrainState:
    epoch: int = 0
    best_epoch: int = 0
    best_val_loss: float = math.inf
    epochs_since_improvement: int = 0
    history: list = field(default_factory=list)
    wall_clock_to_best: float = 0.0
    wall_clock_total: float = 0.0
    optim_state: AdamWState = field(default_factory=AdamWState)
    stopped_reason: str = ""


def build_model(model_cfg, dataset: PreparedDataset):
    """Instantiate the model named by a config object; returns (model, kind)."""
    if isinstance(model_cfg, ModelConfig):
        return DualStreamModel(model_cfg), "dual_stream"
    if isinstance(model_cfg, TcnConfig):
        return TcnModel(model_cfg), "tcn"
    if isinstance(model_cfg, NBeatsConfig):
        return NBeatsModel(model_cfg, dataset.target_index()), "nbeats"
    if isinstance(model_cfg, PersistenceConfig):
        return PersistenceModel(dataset.target_index()), "persistence"
    raise ConfigError(f"unrecognized model config type {type(model_cfg).__name__}")


def model_config_from_dict(kind: str, doc: dict):
    """Rebuild a model config dataclass from its JSON form."""
    doc = dict(doc)
    if kind == "dual_stream":
        return ModelConfig(**doc).validate()
    if kind == "tcn":
        for key in ("channels", "dilations"):
            if key in doc:
                doc[key] = tuple(doc[key])
        return TcnConfig(**doc).validate()
    if kind == "nbeats":
        return NBeatsConfig(**doc).validate()
    if kind == "persistence":
        return PersistenceConfig()
    raise ConfigError(f"unknown model kind {kind!r}")


def _batch_spans(n: int, batch_size: int) -> list:
    """[lo, hi) spans over a permutation; a trailing span of 1 is dropped."""
    spans = []
    for lo in range(0, n, batch_size):
        hi = min(lo + batch_size, n)
        if hi - lo >= 2:
            spans.append((lo, hi))
    return spans


def _training_arrays(dataset: PreparedDataset, cfg: TrainConfig):
    part = dataset.part("train")
    X, y = part.X, part.y
    if cfg.train_fraction < 1.0:
        n_keep = int(round(part.n_samples * cfg.train_fraction))
        X, y = X[part.n_samples - n_keep:], y[part.n_samples - n_keep:]
    if cfg.augment.enabled:
        X, y = augment_windows(X, y, cfg.seed, cfg.augment)
    return X, y


def _validation_loss(model, params, part, loss_cfg: LossConfig) -> float:
    with T.no_grad():
        pred, _ = model.forward(params, part.X, train=False)
        loss = float(compute_loss(pred, part.y, loss_cfg).value)
    if not math.isfinite(loss):
        raise NumericError("non-finite validation loss")
    return loss


def _make_checkpoint(dataset, kind, model_cfg, params, cfg, state) -> Checkpoint:
    best = None if math.isinf(state.best_val_loss) else state.best_val_loss
    return Checkpoint(
        model_kind=kind,
        model_config=asdict(model_cfg),
        params=params,
        feature_names=list(dataset.feature_names),
        scaler=dataset.scaler,
        lookback=dataset.lookback,
        target=dataset.target,
        seed=cfg.seed,
        best_val_loss=best,
        best_epoch=state.best_epoch,
        extra={"train_config": asdict(cfg), "feature_mode": dataset.mode},
    )


def train(dataset: PreparedDataset, model_cfg, train_cfg: TrainConfig):
    """Full training run; returns (Checkpoint, TrainState)."""
    cfg = train_cfg.validate()
    model, kind = build_model(model_cfg, dataset)
    val = dataset.part("val")
    if dataset.part("train").n_samples == 0 or val.n_samples == 0:
        raise DataError("training requires non-empty train and val partitions")

    state = TrainState()
    started = time.monotonic()

    if kind == "persistence":
        state.best_val_loss = _validation_loss(model, {}, val, cfg.loss)
        state.wall_clock_total = time.monotonic() - started
        state.stopped_reason = "no_training_needed"
        return _make_checkpoint(dataset, kind, model_cfg, {}, cfg, state), state

    X, y = _training_arrays(dataset, cfg)
    spans = _batch_spans(X.shape[0], cfg.batch_size)
    if not spans:
        raise DataError(
            f"training set of {X.shape[0]} windows cannot fill a batch of >= 2")

    params = model.init_params(Rng(cfg.seed, "init"))
    best_params = {k: v.copy() for k, v in params.items()}
    shuffle_rng = Rng(cfg.seed, "shuffle")
    dropout_rng = Rng(cfg.seed, "dropout")

    for epoch in range(1, cfg.max_epochs + 1):
        lr = cosine_warm_restart_lr(epoch - 1, cfg.optim)
        perm = shuffle_rng.permutation(X.shape[0])
        loss_sum, n_seen = 0.0, 0
        for b, (lo, hi) in enumerate(spans):
            idx = perm[lo:hi]
            wrapped = wrap_params(params)
            pred, _ = model.forward(wrapped, X[idx], train=True,
                                    rng=dropout_rng)
            loss = compute_loss(pred, y[idx], cfg.loss)
            loss_value = float(loss.value)
            if not math.isfinite(loss_value):
                raise NumericError(
                    f"non-finite training loss at epoch {epoch}, batch {b}")
            T.backward(loss)
            grads = {name: wrapped[name].grad for name in params
                     if wrapped[name].grad is not None}
            clip_global_norm(grads, cfg.optim.clip_norm)
            adamw_step(params, grads, state.optim_state, cfg.optim, lr,
                       model.no_decay)
            loss_sum += loss_value * idx.size
            n_seen += idx.size

        val_loss = _validation_loss(model, params, val, cfg.loss)
        state.epoch = epoch
        state.history.append({"epoch": epoch, "train_loss": loss_sum / n_seen,
                              "val_loss": val_loss, "lr": lr})
        if val_loss < state.best_val_loss:
            state.best_val_loss = val_loss
            state.best_epoch = epoch
            state.epochs_since_improvement = 0
            state.wall_clock_to_best = time.monotonic() - started
            best_params = {k: v.copy() for k, v in params.items()}
        else:
            state.epochs_since_improvement += 1
        if state.epochs_since_improvement >= cfg.patience:
            state.stopped_reason = "early_stopping"
            break
    else:
        state.stopped_reason = "max_epochs"

    state.wall_clock_total = time.monotonic() - started
    ckpt = _make_checkpoint(dataset, kind, model_cfg, best_params, cfg, state)
    return ckpt, state


def evaluate_model(model, params, dataset: PreparedDataset,
                   partition: str = "test", tail_q: float = 0.05,
                   training_time_s=None) -> dict:
    """Raw-unit evaluation report for one partition."""
    part = dataset.part(partition)
    if part.n_samples == 0:
        raise DataError(f"partition {partition!r} has no windows to evaluate")
    yhat = dataset.invert_target(predict(model, params, part.X))
    y = dataset.target_raw[part.target_rows]
    dates = [dataset.dates[r] for r in part.target_rows]
    return evaluation_report(y, yhat, dates=dates, tail_q=tail_q,
                             training_time_s=training_time_s)


def evaluate_checkpoint(ckpt: Checkpoint, dataset: PreparedDataset,
                        partition: str = "test", tail_q: float = 0.05) -> dict:
    model_cfg = model_config_from_dict(ckpt.model_kind, ckpt.model_config)
    model, _ = build_model(model_cfg, dataset)
    return evaluate_model(model, ckpt.params, dataset, partition, tail_q)


def _effective_batches(n_train: int, cfg: TrainConfig, fraction: float) -> int:
    n = int(round(n_train * fraction))
    if cfg.augment.enabled:
        n *= 4
    return len(_batch_spans(n, cfg.batch_size))


def _rows_to_csv(rows: list, csv_path) -> None:
    from .checkpoint import write_csv
    header = list(rows[0].keys()) if rows else []
    write_csv(csv_path, header, [[row[k] for k in header] for row in rows])


def learning_curve(dataset: PreparedDataset, model_cfg, train_cfg: TrainConfig,
                   fractions=LEARNING_CURVE_FRACTIONS, csv_path=None) -> list:
    """Retrain on trailing fractions of the training windows; rows of
    (fraction, n_train, test metrics)."""
    cfg = train_cfg.validate()
    n_train = dataset.part("train").n_samples
    rows = []
    for fraction in fractions:
        if not 0.0 < fraction <= 1.0:
            raise ConfigError("learning-curve fractions must be in (0, 1]")
        if _effective_batches(n_train, cfg, fraction) < 2:
            warnings.warn(
                f"fraction {fraction} yields fewer than 2 batches; skipped",
                stacklevel=2)
            continue
        run_cfg = replace(cfg, train_fraction=fraction)
        ckpt, state = train(dataset, model_cfg, run_cfg)
        report = evaluate_checkpoint(ckpt, dataset)
        row = {"fraction": fraction,
               "n_train": int(round(n_train * fraction)),
               "best_epoch": state.best_epoch,
               "best_val_loss": state.best_val_loss}
        row.update(report["metrics"])
        rows.append(row)
    if csv_path is not None:
        _rows_to_csv(rows, csv_path)
    return rows


def feature_ablation(table, model_cfg, train_cfg: TrainConfig,
                     modes=FEATURE_MODES, lookback: int = 30,
                     train_frac: float = 0.8, val_frac: float = 0.2,
                     feature_spec=None, csv_path=None) -> list:
    """Train and evaluate under each feature mode with identical seeds."""
    if not modes:
        raise ConfigError("feature_ablation needs at least one mode")
    from .features import FeatureSpec
    rows = []
    for mode in modes:
        if mode not in FEATURE_MODES:
            raise ConfigError(f"unknown feature mode {mode!r}")
        spec = replace(feature_spec or FeatureSpec(), mode=mode)
        ds = prepare(table, lookback=lookback, train_frac=train_frac,
                     val_frac=val_frac, feature_spec=spec)
        cfg_m = model_cfg
        if hasattr(model_cfg, "n_features"):
            cfg_m = replace(model_cfg, n_features=ds.n_features)
        if hasattr(model_cfg, "lookback"):
            cfg_m = replace(cfg_m, lookback=ds.lookback)
        run_cfg = replace(train_cfg.validate(), feature_mode=mode)
        ckpt, state = train(ds, cfg_m, run_cfg)
        report = evaluate_checkpoint(ckpt, ds)
        row = {"mode": mode, "n_features": ds.n_features,
               "best_epoch": state.best_epoch,
               "best_val_loss": state.best_val_loss}
        row.update(report["metrics"])
        rows.append(row)
    if csv_path is not None:
        _rows_to_csv(rows, csv_path)
    return rows
