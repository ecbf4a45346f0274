"""Per-sample training loop, cross-validation and train/test protocols."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .. import evalkit
from .. import tensorcore as tc
from ..errors import TooFewSamples
from ..seeding import rng_for
from .baselines import classic_gravity_fit, linear_regression_fit
from .features import HEAVY_TAILED, FeatureScaler
from .models import ModelConfig, flows_from_scores, forward, init_params, sample_loss

log = logging.getLogger(__name__)


@dataclass
class OptimConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-5
    max_epochs: int = 200
    plateau_factor: float = 0.1
    plateau_patience: int = 10
    early_stop_patience: int = 20
    threshold: float = 1e-6
    restore_best: bool = True
    log_features: bool = True

    def to_dict(self):
        return asdict(self)


@dataclass
class FitResult:
    """Outcome of training one model on one split."""

    cfg: ModelConfig
    params: dict | None
    scaler: FeatureScaler
    baseline: object | None = None
    history: list = field(default_factory=list)  # dicts: epoch, train_loss, val_cpc, lr
    lr_events: list = field(default_factory=list)
    best_epoch: int | None = None

    def predict(self, sample) -> np.ndarray:
        Xs = self.scaler.transform(sample.X)
        if self.cfg.family in ("transformer_gravity", "deep_gravity"):
            return flows_from_scores(forward(self.cfg, self.params, Xs, train=False), sample.O)
        if self.cfg.family == "linear_regression":
            return self.baseline.predict(replace(sample, X=Xs))
        return self.baseline.predict(sample)


def _compare(fit: FitResult, samples) -> evalkit.FlowComparison:
    fc = evalkit.FlowComparison()
    for s in samples:
        fc.add(s.source_port, fit.predict(s), s.y)
    return fc


def mean_cpc(fit: FitResult, samples) -> float:
    return evalkit.cpc(_compare(fit, samples)).mean


def fit_model(cfg: ModelConfig, train, val=None, optim: OptimConfig | None = None, seed: int = 0) -> FitResult:
    """Fit one model. Neural families take one Adam step per sample.

    ``val`` drives the plateau scheduler, early stopping and best-epoch
    restoration; without it the training samples are monitored instead.
    """
    optim = optim or OptimConfig()
    scaler = FeatureScaler.fit(train, HEAVY_TAILED if optim.log_features else ())
    if cfg.family == "classic_gravity":
        return FitResult(cfg, None, scaler, baseline=classic_gravity_fit(train))
    if cfg.family == "linear_regression":
        scaled = [replace(s, X=scaler.transform(s.X)) for s in train]
        return FitResult(cfg, None, scaler, baseline=linear_regression_fit(scaled))

    params = init_params(cfg, rng_for(seed, "init"))
    shuffle_rng = rng_for(seed, "shuffle")
    dropout_rng = rng_for(seed, "dropout")
    opt = tc.Adam(params, lr=optim.lr, betas=(optim.beta1, optim.beta2), eps=optim.eps,
                  weight_decay=optim.weight_decay)
    sched = tc.PlateauScheduler(optim.plateau_factor, optim.plateau_patience, optim.threshold)
    stopper = tc.EarlyStopping(optim.early_stop_patience, optim.threshold)
    train_x = [(scaler.transform(s.X), s.y) for s in train]
    monitor = val if val else train
    fit = FitResult(cfg, params, scaler)
    best_val, best_params = -np.inf, None

    for epoch in range(optim.max_epochs):
        total = 0.0
        for i in shuffle_rng.permutation(len(train_x)):
            X, y = train_x[i]
            loss = sample_loss(forward(cfg, params, X, train=True, rng=dropout_rng), y)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += float(loss.data)
        val_cpc = mean_cpc(fit, monitor)
        fit.history.append({"epoch": epoch, "train_loss": total, "val_cpc": val_cpc, "lr": opt.lr})
        if val_cpc > best_val + optim.threshold:
            best_val = val_cpc
            best_params = {k: p.data.copy() for k, p in params.items()}
            fit.best_epoch = epoch
        if sched.step(val_cpc):
            opt.lr *= optim.plateau_factor
            fit.lr_events.append({"epoch": epoch, "factor": optim.plateau_factor, "lr": opt.lr})
        if stopper.step(val_cpc):
            log.info("early stop at epoch %d (best %.4f at %s)", epoch, best_val, fit.best_epoch)
            break
    if optim.restore_best and best_params is not None:
        for k, arr in best_params.items():
            params[k].data = arr
    return fit


def cv_folds(samples, k: int = 5, seed: int = 0) -> list:
    """Disjoint source-port folds, dealt round-robin after sorting by
    destination count so each fold sees a similar mix of sample sizes."""
    rng = rng_for(seed, "folds")
    keys = rng.permutation(len(samples))
    order = sorted(range(len(samples)), key=lambda i: (samples[i].N, keys[i]))
    folds = [[] for _ in range(k)]
    for j, i in enumerate(order):
        folds[j % k].append(i)
    return [sorted(f) for f in folds]


@dataclass
class TrainResult:
    fits: list
    folds: dict  # name -> FlowComparison on held-out samples
    predictions: list  # rows (src_port, region, y_true, y_pred, fold)
    split: str

    @property
    def fold_cpc(self) -> dict:
        return {name: evalkit.cpc(fc).mean for name, fc in self.folds.items()}

    @property
    def mean_cpc(self) -> float:
        return float(np.mean(list(self.fold_cpc.values())))

    def report(self) -> dict:
        return evalkit.report(self.folds)

    def history_rows(self) -> list:
        rows = []
        for f, fit in enumerate(self.fits):
            events = {e["epoch"] for e in fit.lr_events}
            for h in fit.history:
                rows.append({"fold": f, **h, "lr_reduced": int(h["epoch"] in events)})
        return rows


def _held_out(fit, samples, fold_name, fc, rows):
    for s in samples:
        pred = fit.predict(s)
        fc.add(s.source_port, pred, s.y)
        for r, yt, yp in zip(s.regions, s.y, pred):
            rows.append((s.source_port, r, float(yt), float(yp), fold_name))


def train(cfg: ModelConfig, samples, split: str = "cv5", seed: int = 0, optim: OptimConfig | None = None,
          test_samples=None, val_fraction: float = 0.2) -> TrainResult:
    """Run the cross-validation (``"cv5"``) or train/test protocol.

    In ``cv5`` each held-out fold doubles as the validation set that the
    learning-rate schedule and early stopping monitor. In ``"train_test"``
    a seeded ``val_fraction`` of the training samples is held back for
    monitoring and ``test_samples`` are scored at the end.
    """
    samples = list(samples)
    if split == "cv5":
        if len(samples) < 10:
            raise TooFewSamples(f"5-fold cross-validation needs >= 10 samples, got {len(samples)}")
        fits, folds, rows = [], {}, []
        for f, idx in enumerate(cv_folds(samples, 5, seed)):
            held = set(idx)
            tr = [s for i, s in enumerate(samples) if i not in held]
            va = [samples[i] for i in idx]
            fit = fit_model(cfg, tr, va, optim, seed=seed * 1000 + f)
            fc = evalkit.FlowComparison()
            _held_out(fit, va, f"fold{f}", fc, rows)
            fits.append(fit)
            folds[f"fold{f}"] = fc
        return TrainResult(fits, folds, rows, split)
    if split == "train_test":
        if test_samples is None:
            raise ValueError("train_test split needs test_samples")
        if len(samples) < 2:
            raise TooFewSamples("need at least two training samples")
        perm = rng_for(seed, "val_split").permutation(len(samples))
        n_val = max(1, int(round(val_fraction * len(samples))))
        va = [samples[i] for i in sorted(perm[:n_val])]
        tr = [samples[i] for i in sorted(perm[n_val:])]
        fit = fit_model(cfg, tr, va, optim, seed=seed)
        fc, rows = evalkit.FlowComparison(), []
        _held_out(fit, test_samples, "test", fc, rows)
        return TrainResult([fit], {"test": fc}, rows, split)
    raise ValueError(f"unknown split {split!r}")


def export_params(fit: FitResult) -> dict:
    """Flat name -> array mapping for checkpointing, scaler included."""
    out = {k: p.data for k, p in (fit.params or {}).items()}
    out["scaler.mean"] = fit.scaler.mean
    out["scaler.std"] = fit.scaler.std
    return out
