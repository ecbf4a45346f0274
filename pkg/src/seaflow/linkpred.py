"""Real-vs-pseudo link classification with a small logistic regression."""

from __future__ import annotations

import itertools
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, NonFiniteFeature, SingleClass, TooFewRows

log = logging.getLogger(__name__)

FEATURES = ("haversine_km", "sea_km", "edge_importance")
DEFAULT_GRID = {"epochs": [500], "l2": [0.0, 1e-3, 1e-1], "lr": [0.01, 0.1]}
LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class LinkFeatureRow:
    src: str
    dst: str
    x: tuple
    y: int


def link_rows(cn):
    """Feature matrix, labels and (src, dst) pairs from a complete network."""
    X = np.column_stack([cn.haversine_km, cn.sea_km, cn.edge_importance]).astype(float)
    y = cn.real.astype(int)
    return X, y, list(zip(cn.src, cn.dst))


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    std: np.ndarray
    keep: np.ndarray  # boolean mask over raw feature columns
    log_features: bool = False
    history: list | None = None

    def transform(self, X):
        X = _pre(X, self.log_features)
        return (X[:, self.keep] - self.mean) / self.std

    def decision(self, X):
        return self.transform(X) @ self.weights + self.bias

    def to_dict(self):
        return {
            "weights": self.weights.tolist(), "bias": self.bias,
            "mean": self.mean.tolist(), "std": self.std.tolist(),
            "keep": self.keep.tolist(), "log_features": self.log_features,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["weights"], dtype=float), float(d["bias"]),
                   np.array(d["mean"], dtype=float), np.array(d["std"], dtype=float),
                   np.array(d["keep"], dtype=bool), bool(d.get("log_features", False)))


def _pre(X, log_features):
    X = np.asarray(X, dtype=float)
    # features are non-negative distances and importances spanning many decades
    return np.log(np.maximum(X, 0.0) + LOG_FLOOR) if log_features else X


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def logistic_loss(w, b, Xs, y, l2):
    """Mean log-loss plus ``l2/2 * |w|^2``; returns (loss, grad_w, grad_b)."""
    z = Xs @ w + b
    # log(1+e^z) - y z, computed stably
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * float(w @ w)
    r = sigmoid(z) - y
    gw = Xs.T @ r / len(y) + l2 * w
    gb = float(np.mean(r))
    return float(loss), gw, gb


def _check_rows(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be (n, f) with one label per row")
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))[0]
        raise NonFiniteFeature(f"non-finite feature at row {bad[0]}, column {bad[1]}")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return X, y


def fit_logistic(X, y, l2: float = 0.0, lr: float = 0.1, epochs: int = 500, seed: int = 0,
                 log_features: bool = False) -> LogisticModel:
    """Full-batch gradient descent on standardized features.

    With ``log_features`` each column is mapped to ``log(x + 1e-12)`` before
    standardizing, which keeps a handful of extreme importances from
    flattening every other row.
    """
    X, y = _check_rows(X, y)
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if len(np.unique(y)) < 2:
        raise SingleClass("training labels contain a single class")
    X = _pre(X, log_features)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    keep = std > 0
    if not keep.all():
        log.warning("dropping constant feature columns %s", np.flatnonzero(~keep).tolist())
    Xs = (X[:, keep] - mean[keep]) / std[keep]
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 0.01, size=Xs.shape[1])
    b = 0.0
    history = []
    for _ in range(epochs):
        loss, gw, gb = logistic_loss(w, b, Xs, y, l2)
        history.append(loss)
        w = w - lr * gw
        b = b - lr * gb
    history.append(logistic_loss(w, b, Xs, y, l2)[0])
    return LogisticModel(w, b, mean[keep], std[keep], keep, log_features, history)


def predict_links(model: LogisticModel, X, threshold: float = 0.5):
    """Probabilities and hard labels (probability >= threshold)."""
    p = sigmoid(model.decision(X))
    return p, (p >= threshold).astype(int)


def classification_report(pred, truth) -> dict:
    pred = np.asarray(pred, dtype=int)
    truth = np.asarray(truth, dtype=int)
    if len(pred) == 0:
        raise EmptyInput("no predictions to score")
    if len(pred) != len(truth):
        raise ValueError("pred and truth lengths differ")
    tp = int(np.sum((pred == 1) & (truth == 1)))
    tn = int(np.sum((pred == 0) & (truth == 0)))
    fp = int(np.sum((pred == 1) & (truth == 0)))
    fn = int(np.sum((pred == 0) & (truth == 1)))
    return {"accuracy": (tp + tn) / len(pred), "confusion": [[tn, fp], [fn, tp]]}


def stratified_folds(y, k: int, seed: int) -> list:
    """Disjoint, covering index folds with per-label round-robin assignment."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    offset = 0
    for label in np.unique(y):
        idx = np.flatnonzero(y == label)
        rng.shuffle(idx)
        for j, i in enumerate(idx):
            folds[(j + offset) % k].append(int(i))
        offset += len(idx)
    return [np.sort(np.array(f, dtype=int)) for f in folds]


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SEAFLOW_THREADS", "1")))
    except ValueError:
        return 1


def grid_search_cv(X, y, grid: dict | None = None, k: int = 5, seed: int = 0, log_features: bool = False) -> dict:
    """Pick the grid point with the best mean validation accuracy.

    Points are visited in lexicographic order of their (sorted-key) value
    tuples; a later point must be strictly better to win.
    """
    X, y = _check_rows(X, y)
    if k < 2:
        raise ValueError("k must be >= 2")
    if len(y) < k:
        raise TooFewRows(f"{len(y)} rows cannot fill {k} folds")
    grid = grid or DEFAULT_GRID
    keys = sorted(grid)
    points = [dict(zip(keys, vals)) for vals in itertools.product(*(grid[key] for key in keys))]
    folds = stratified_folds(y, k, seed)
    all_idx = np.arange(len(y))

    def evaluate(point):
        accs = []
        for f, val in enumerate(folds):
            train = np.setdiff1d(all_idx, val)
            model = fit_logistic(X[train], y[train], seed=seed + f, log_features=log_features, **point)
            _, pred = predict_links(model, X[val])
            accs.append(float(np.mean(pred == y[val])))
        return accs

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(evaluate, points))
    best = 0
    for i, accs in enumerate(results):
        if np.mean(accs) > np.mean(results[best]):
            best = i
    return {
        "best": points[best],
        "fold_accuracies": results[best],
        "mean_accuracy": float(np.mean(results[best])),
        "points": [{"params": p, "mean_accuracy": float(np.mean(a))} for p, a in zip(points, results)],
        "folds": [f.tolist() for f in folds],
    }
