"""Classic gravity law and linear-regression baselines."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import EmptySampleSet

log = logging.getLogger(__name__)

# raw feature columns used by the classic law
ORIGIN_MASS, DEST_MASS, DISTANCE = 0, 1, 2


@dataclass
class ClassicGravity:
    """``y_ij ~ k * m_i**alpha * m_j**beta / d_ij**gamma``, renormalized per source."""

    k: float
    alpha: float
    beta: float
    gamma: float

    def predict(self, sample) -> np.ndarray:
        X = sample.X
        d = X[:, DISTANCE]
        if np.any(d <= 0):
            raise ValueError(f"sample {sample.source_port}: non-positive distance")
        mj = np.maximum(X[:, DEST_MASS], 1e-300)
        logits = self.beta * np.log(mj) - self.gamma * np.log(d)
        w = np.exp(logits - logits.max())
        return sample.O * w / w.sum()

    def as_tuple(self):
        return self.k, self.alpha, self.beta, self.gamma


def classic_gravity_fit(samples) -> ClassicGravity:
    """Least squares on log flows with source and destination-region effects.

    Within a source the origin mass and normalization are constant and
    within a region the destination mass is constant, so the distance
    exponent is identified from the remaining variation alone. The region
    effects are then regressed on log destination mass for ``beta`` and the
    source effects on log origin mass for ``k`` and ``alpha``. Pairs with
    zero observed flow carry no log information and are left out.
    """
    if not samples:
        raise EmptySampleSet("no samples to fit")
    rows = []
    for s in samples:
        if np.any(s.X[:, DISTANCE] <= 0):
            raise ValueError(f"sample {s.source_port}: zero-distance pair")
        for j, r in enumerate(s.regions):
            if s.y[j] > 0:
                rows.append((s.source_port, r, np.log(s.y[j]), np.log(s.X[j, DISTANCE]),
                             np.log(max(s.X[j, DEST_MASS], 1e-300)), np.log(max(s.O, 1e-300))))
    if not rows:
        raise EmptySampleSet("no positive flows to fit")
    sources = sorted({r[0] for r in rows})
    regions = sorted({r[1] for r in rows})
    si = {s: i for i, s in enumerate(sources)}
    ri = {r: i for i, r in enumerate(regions)}
    n, S, R = len(rows), len(sources), len(regions)
    A = np.zeros((n, 1 + S + R - 1))
    b = np.empty(n)
    for i, (src, reg, ly, ld, _, _) in enumerate(rows):
        A[i, 0] = ld
        A[i, 1 + si[src]] = 1.0
        if ri[reg] > 0:
            A[i, S + ri[reg]] = 1.0
        b[i] = ly
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    gamma = -float(coef[0])
    src_fx = coef[1:1 + S]
    reg_fx = np.concatenate([[0.0], coef[1 + S:]])

    log_mj = {}
    log_oi = {}
    for src, reg, _, _, lm, lo in rows:
        log_mj[reg] = lm
        log_oi[src] = lo
    beta = _slope([log_mj[r] for r in regions], reg_fx)
    alpha = _slope([log_oi[s] for s in sources], src_fx)
    k = float(np.exp(np.mean(src_fx) - alpha * np.mean([log_oi[s] for s in sources])))
    return ClassicGravity(k=k, alpha=alpha, beta=beta, gamma=gamma)


def _slope(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    den = float(xc @ xc)
    return float(xc @ (y - y.mean()) / den) if den > 0 else 0.0


@dataclass
class LinearFlowRegression:
    weights: np.ndarray  # intercept first

    def predict(self, sample) -> np.ndarray:
        X = np.column_stack([np.ones(len(sample.X)), sample.X])
        return np.maximum(X @ self.weights, 0.0)


def linear_regression_fit(samples) -> LinearFlowRegression:
    """Ordinary least squares of each ``y_ij`` on its feature vector."""
    if not samples:
        raise EmptySampleSet("no samples to fit")
    X = np.vstack([s.X for s in samples])
    y = np.concatenate([s.y for s in samples])
    A = np.column_stack([np.ones(len(X)), X])
    w, *_ = np.linalg.lstsq(A, y, rcond=None)
    return LinearFlowRegression(w)
