"""Per-source flow metrics: CPC, NRMSE and Pearson correlation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyComparison

log = logging.getLogger(__name__)


@dataclass
class FlowComparison:
    """Predicted and observed flows grouped by source: ``{source: (y_pred, y_true)}``."""

    pairs: dict = field(default_factory=dict)

    def add(self, source, y_pred, y_true):
        y_pred = np.asarray(y_pred, dtype=float)
        y_true = np.asarray(y_true, dtype=float)
        if y_pred.shape != y_true.shape:
            raise ValueError(f"source {source}: predicted and observed lengths differ")
        if not (np.all(np.isfinite(y_pred)) and np.all(np.isfinite(y_true))):
            raise ValueError(f"source {source}: non-finite flows")
        self.pairs[source] = (y_pred, y_true)
        return self

    @classmethod
    def from_rows(cls, rows):
        """Group ``(source, y_true, y_pred)`` rows."""
        grouped = {}
        for src, yt, yp in rows:
            grouped.setdefault(src, ([], []))
            grouped[src][0].append(yp)
            grouped[src][1].append(yt)
        fc = cls()
        for src, (yp, yt) in grouped.items():
            fc.add(src, yp, yt)
        return fc

    def __len__(self):
        return len(self.pairs)


@dataclass
class MetricResult:
    per_source: dict
    mean: float
    skipped: list

    @property
    def values(self):
        return np.array(list(self.per_source.values()))


def _summarize(fc, fn, name):
    if len(fc) == 0:
        raise EmptyComparison("no sources to compare")
    per, skipped = {}, []
    for src, (yp, yt) in fc.pairs.items():
        v = fn(yp, yt)
        if v is None:
            skipped.append(src)
        else:
            per[src] = v
    if skipped:
        log.warning("%s: skipped %d degenerate source(s)", name, len(skipped))
    mean = float(np.mean(list(per.values()))) if per else float("nan")
    return MetricResult(per, mean, skipped)


def cpc_pair(y_pred, y_true):
    denom = float(np.sum(y_pred) + np.sum(y_true))
    if denom <= 0:
        return None
    return 2.0 * float(np.sum(np.minimum(y_pred, y_true))) / denom


def nrmse_pair(y_pred, y_true):
    rng = float(np.max(y_true) - np.min(y_true))
    if rng <= 0:
        return None
    return float(np.sqrt(np.mean((y_true - y_pred) ** 2))) / rng


def pearson_pair(y_pred, y_true):
    a = y_pred - y_pred.mean()
    b = y_true - y_true.mean()
    den = float(np.sqrt(np.sum(a * a) * np.sum(b * b)))
    if den <= 0:
        return None
    return float(np.clip(np.sum(a * b) / den, -1.0, 1.0))


def cpc(fc: FlowComparison) -> MetricResult:
    """Common part of commuters, ``2 sum min(yp, y) / (sum yp + sum y)`` per source."""
    return _summarize(fc, cpc_pair, "cpc")


def nrmse(fc: FlowComparison) -> MetricResult:
    """RMSE over the observed range, per source; zero-range sources are skipped."""
    return _summarize(fc, nrmse_pair, "nrmse")


def pearson(fc: FlowComparison) -> MetricResult:
    return _summarize(fc, pearson_pair, "pearson")


def _stats(values):
    values = [v for v in values if np.isfinite(v)]
    if not values:
        return {"mean": None, "max": None, "min": None}
    return {"mean": float(np.mean(values)), "max": float(np.max(values)), "min": float(np.min(values))}


def report(folds: dict) -> dict:
    """Table-style summary over folds.

    ``folds`` maps a fold name to its :class:`FlowComparison`. Fold-level
    extrema are taken over fold means; source-level extrema over all sources.
    """
    out = {"folds": {}, "fold_level": {}, "source_level": {}}
    per_metric = {"cpc": cpc, "nrmse": nrmse, "pearson": pearson}
    fold_means = {k: [] for k in per_metric}
    source_vals = {k: [] for k in per_metric}
    for name, fc in folds.items():
        entry = {}
        for key, fn in per_metric.items():
            res = fn(fc)
            entry[key] = res.mean if np.isfinite(res.mean) else None
            entry[f"{key}_skipped"] = len(res.skipped)
            fold_means[key].append(res.mean)
            source_vals[key].extend(res.per_source.values())
        entry["n_sources"] = len(fc)
        out["folds"][name] = entry
    for key in per_metric:
        out["fold_level"][key] = _stats(fold_means[key])
        out["source_level"][key] = _stats(source_vals[key])
    return out
