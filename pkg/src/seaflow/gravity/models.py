"""Transformer Gravity and Deep Gravity scoring networks.

Both map a sample's (N, 10) destination features to N scores; flows are
``O * softmax(scores)`` and training minimizes the flow-weighted
cross-entropy :func:`sample_loss`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import tensorcore as tc
from ..errors import ShapeMismatch
from .features import N_FEATURES

FAMILIES = ("transformer_gravity", "deep_gravity", "classic_gravity", "linear_regression")


@dataclass
class ModelConfig:
    family: str = "transformer_gravity"
    layers: int = 3
    d_model: int = 64
    heads: int = 2
    ffn_dim: int = 64
    dropout: float = 0.1
    ln_eps: float = 1e-5
    leaky_slope: float = 0.01
    n_features: int = N_FEATURES

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")
        if self.family == "transformer_gravity" and self.d_model % self.heads:
            raise ValueError("d_model must be divisible by heads")
        if self.family == "deep_gravity":
            deep_gravity_dims(self.layers)

    def to_dict(self):
        return asdict(self)


def deep_gravity_dims(layers: int) -> list:
    """Hidden widths: one 256-wide layer for every two 128-wide ones.

    15 layers gives the original 5 x 256 followed by 10 x 128.
    """
    if layers < 3 or layers % 3:
        raise ValueError(f"deep gravity layer count must be a positive multiple of 3, got {layers}")
    return [256] * (layers // 3) + [128] * (2 * layers // 3)


def init_params(cfg: ModelConfig, rng: np.random.Generator) -> dict:
    p = {}
    if cfg.family == "transformer_gravity":
        d = cfg.d_model
        p["embed.W"], p["embed.b"] = tc.init_linear(rng, d, cfg.n_features)
        for i in range(cfg.layers):
            pre = f"enc{i}."
            for name in ("q", "k", "v", "o"):
                p[pre + "W" + name], p[pre + "b" + name] = tc.init_linear(rng, d, d)
            p[pre + "ln1.alpha"] = tc.parameter(np.ones(d))
            p[pre + "ln1.beta"] = tc.parameter(np.zeros(d))
            p[pre + "ff1.W"], p[pre + "ff1.b"] = tc.init_linear(rng, cfg.ffn_dim, d)
            p[pre + "ff2.W"], p[pre + "ff2.b"] = tc.init_linear(rng, d, cfg.ffn_dim)
            p[pre + "ln2.alpha"] = tc.parameter(np.ones(d))
            p[pre + "ln2.beta"] = tc.parameter(np.zeros(d))
        p["out.W"], p["out.b"] = tc.init_linear(rng, 1, d)
    elif cfg.family == "deep_gravity":
        widths = [cfg.n_features] + deep_gravity_dims(cfg.layers) + [1]
        for i, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:])):
            p[f"fc{i}.W"], p[f"fc{i}.b"] = tc.init_linear(rng, n_out, n_in)
    else:
        raise ValueError(f"{cfg.family} has no neural parameters")
    return p


def count_parameters(cfg: ModelConfig) -> int:
    return tc.count_parameters(init_params(cfg, np.random.default_rng(0)))


def _encoder_layer(cfg, p, pre, z, train, rng):
    attn = tc.multi_head_attention(z, {
        "Wq": p[pre + "Wq"], "bq": p[pre + "bq"], "Wk": p[pre + "Wk"], "bk": p[pre + "bk"],
        "Wv": p[pre + "Wv"], "bv": p[pre + "bv"], "Wo": p[pre + "Wo"], "bo": p[pre + "bo"],
    }, cfg.heads)
    z2 = tc.layer_norm(z + tc.dropout(attn, cfg.dropout, train, rng),
                       p[pre + "ln1.alpha"], p[pre + "ln1.beta"], cfg.ln_eps)
    h = tc.dropout(tc.relu(tc.linear(z2, p[pre + "ff1.W"], p[pre + "ff1.b"])), cfg.dropout, train, rng)
    h = tc.dropout(tc.linear(h, p[pre + "ff2.W"], p[pre + "ff2.b"]), cfg.dropout, train, rng)
    return tc.layer_norm(h + z2, p[pre + "ln2.alpha"], p[pre + "ln2.beta"], cfg.ln_eps)


def forward_transformer_gravity(cfg: ModelConfig, params: dict, X, train: bool = False, rng=None) -> tc.Tensor:
    X = tc.as_tensor(X)
    if X.data.ndim != 2 or X.shape[1] != cfg.n_features:
        raise ShapeMismatch(f"expected (N, {cfg.n_features}) features, got {X.shape}")
    z = tc.linear(X, params["embed.W"], params["embed.b"])
    for i in range(cfg.layers):
        z = _encoder_layer(cfg, params, f"enc{i}.", z, train, rng)
    return tc.reshape(tc.linear(z, params["out.W"], params["out.b"]), (X.shape[0],))


def forward_deep_gravity(cfg: ModelConfig, params: dict, X, train: bool = False, rng=None) -> tc.Tensor:
    X = tc.as_tensor(X)
    if X.data.ndim != 2 or X.shape[1] != cfg.n_features:
        raise ShapeMismatch(f"expected (N, {cfg.n_features}) features, got {X.shape}")
    n_hidden = len(deep_gravity_dims(cfg.layers))
    h = X
    for i in range(n_hidden):
        h = tc.leaky_relu(tc.linear(h, params[f"fc{i}.W"], params[f"fc{i}.b"]), cfg.leaky_slope)
    out = tc.linear(h, params[f"fc{n_hidden}.W"], params[f"fc{n_hidden}.b"])
    return tc.reshape(out, (X.shape[0],))


def forward(cfg: ModelConfig, params: dict, X, train: bool = False, rng=None) -> tc.Tensor:
    if cfg.family == "transformer_gravity":
        return forward_transformer_gravity(cfg, params, X, train, rng)
    if cfg.family == "deep_gravity":
        return forward_deep_gravity(cfg, params, X, train, rng)
    raise ValueError(f"{cfg.family} is not a neural family")


def flows_from_scores(scores, O: float) -> np.ndarray:
    """Distribute ``O`` departures over destinations by softmax of the scores."""
    s = np.asarray(scores.data if isinstance(scores, tc.Tensor) else scores, dtype=float)
    e = np.exp(s - s.max())
    return O * e / e.sum()


def sample_loss(scores: tc.Tensor, y, O: float | None = None) -> tc.Tensor:
    """``-sum_j y_j * log_softmax(scores)_j``; ``O`` only enters through the
    flows, so it is accepted for symmetry but unused."""
    scores = tc.as_tensor(scores)
    y = np.asarray(y, dtype=float)
    return -(tc.log_softmax_row(scores) * y).sum()
