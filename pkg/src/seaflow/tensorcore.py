"""A small dense reverse-mode autodiff engine over float64 numpy arrays.

Only what the flow models need: linear layers, multi-head self-attention,
layer norm, dropout, (log-)softmax, Adam, and plateau/early-stop schedules.
Each op records its parents and a closure that pushes the output gradient
back to them; :meth:`Tensor.backward` walks the graph in reverse
topological order.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import NonScalarLoss, ShapeMismatch

DTYPE = np.float64


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad=False, _parents=(), op=""):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = None
        self.op = op

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = None

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=DTYPE, copy=True)
        else:
            self.grad += g

    def backward(self):
        if self.data.size != 1:
            raise NonScalarLoss(f"backward() needs a scalar loss, got shape {self.shape}")
        topo, seen = [], set()
        stack = [(self, False)]
        # iterative post-order DFS; deep stacks of layers overflow recursion
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self._accum(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def __pow__(self, k):
        return power(self, k)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def _result(data, parents, op, backward):
    rg = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=rg, _parents=parents if rg else (), op=op)
    if rg:
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    """Sum a broadcast gradient back down to ``shape``."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise and structural ops

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError as e:
        raise ShapeMismatch(str(e)) from None

    def back(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g, b.shape))

    return _result(data, (a, b), "add", back)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _result(-a.data, (a,), "neg", lambda g: a._accum(-g))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError as e:
        raise ShapeMismatch(str(e)) from None

    def back(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * a.data, b.shape))

    return _result(data, (a, b), "mul", back)


def power(a, k: float) -> Tensor:
    a = as_tensor(a)
    return _result(a.data ** k, (a,), "pow", lambda g: a._accum(g * k * a.data ** (k - 1)))


def exp(a) -> Tensor:
    a = as_tensor(a)
    data = np.exp(a.data)
    return _result(data, (a,), "exp", lambda g: a._accum(g * data))


def log(a) -> Tensor:
    a = as_tensor(a)
    return _result(np.log(a.data), (a,), "log", lambda g: a._accum(g / a.data))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _result(a.data * mask, (a,), "relu", lambda g: a._accum(g * mask))


def leaky_relu(a, slope: float = 0.01) -> Tensor:
    a = as_tensor(a)
    scale = np.where(a.data > 0, 1.0, slope)
    return _result(a.data * scale, (a,), "leaky_relu", lambda g: a._accum(g * scale))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}")

    def back(g):
        if a.requires_grad:
            a._accum(g @ b.data.T)
        if b.requires_grad:
            b._accum(a.data.T @ g)

    return _result(a.data @ b.data, (a, b), "matmul", back)


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _result(a.data.T, (a,), "transpose", lambda g: a._accum(g.T))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    return _result(a.data.reshape(shape), (a,), "reshape", lambda g: a._accum(g.reshape(old)))


def getitem(a, idx) -> Tensor:
    a = as_tensor(a)

    def back(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        a._accum(full)

    return _result(a.data[idx], (a,), "getitem", back)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeMismatch(str(e)) from None
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def back(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accum(g[tuple(sl)])

    return _result(data, tuple(tensors), "concat", back)


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accum(np.broadcast_to(g, a.shape))

    return _result(a.data.sum(axis=axis, keepdims=keepdims), (a,), "sum", back)


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else a.shape[axis]
    return tsum(a, axis, keepdims) * (1.0 / n)


# ---------------------------------------------------------------------------
# network layers

def linear(x, W, b=None) -> Tensor:
    """``x @ W.T + b`` for x of shape (N, in) and W of shape (out, in)."""
    x, W = as_tensor(x), as_tensor(W)
    if x.data.ndim != 2 or W.data.ndim != 2 or x.shape[1] != W.shape[1]:
        raise ShapeMismatch(f"linear: input {x.shape} vs weight {W.shape}")
    data = x.data @ W.data.T
    parents = (x, W)
    if b is not None:
        b = as_tensor(b)
        if b.shape != (W.shape[0],):
            raise ShapeMismatch(f"linear: bias {b.shape} vs weight {W.shape}")
        data = data + b.data
        parents = (x, W, b)

    def back(g):
        if x.requires_grad:
            x._accum(g @ W.data)
        if W.requires_grad:
            W._accum(g.T @ x.data)
        if b is not None and b.requires_grad:
            b._accum(g.sum(axis=0))

    return _result(data, parents, "linear", back)


def softmax_row(x) -> Tensor:
    """Softmax along the last axis, max-shifted."""
    x = as_tensor(x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        x._accum(y * (g - (g * y).sum(axis=-1, keepdims=True)))

    return _result(y, (x,), "softmax", back)


def log_softmax_row(x) -> Tensor:
    x = as_tensor(x)
    m = x.data.max(axis=-1, keepdims=True)
    lse = m + np.log(np.exp(x.data - m).sum(axis=-1, keepdims=True))
    y = x.data - lse

    def back(g):
        x._accum(g - np.exp(y) * g.sum(axis=-1, keepdims=True))

    return _result(y, (x,), "log_softmax", back)


def layer_norm(x, alpha, beta, eps: float = 1e-5) -> Tensor:
    """Per-row standardization (biased variance) followed by ``* alpha + beta``."""
    x, alpha, beta = as_tensor(x), as_tensor(alpha), as_tensor(beta)
    d = x.shape[-1]
    if d < 1 or alpha.shape != (d,) or beta.shape != (d,):
        raise ShapeMismatch(f"layer_norm: input {x.shape}, alpha {alpha.shape}, beta {beta.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv

    def back(g):
        if alpha.requires_grad:
            alpha._accum((g * xhat).reshape(-1, d).sum(axis=0))
        if beta.requires_grad:
            beta._accum(g.reshape(-1, d).sum(axis=0))
        if x.requires_grad:
            gh = g * alpha.data
            x._accum(inv / d * (d * gh - gh.sum(axis=-1, keepdims=True)
                                - xhat * (gh * xhat).sum(axis=-1, keepdims=True)))

    return _result(xhat * alpha.data + beta.data, (x, alpha, beta), "layer_norm", back)


def dropout(x, p: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout; the identity in eval mode or when ``p == 0``."""
    x = as_tensor(x)
    if not 0.0 <= p < 1.0:
        raise ValueError("dropout probability must lie in [0, 1)")
    if not train or p == 0.0:
        return x
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return _result(x.data * mask, (x,), "dropout", lambda g: x._accum(g * mask))


def multi_head_attention(Z, params: dict, heads: int, return_weights: bool = False):
    """Scaled dot-product self-attention over the rows of ``Z`` (N, d).

    ``params`` holds ``Wq, bq, Wk, bk, Wv, bv, Wo, bo``. There is no
    positional encoding, so the map is permutation-equivariant in the rows.
    """
    Z = as_tensor(Z)
    d = Z.shape[-1]
    if Z.data.ndim != 2 or d % heads:
        raise ShapeMismatch(f"attention: input {Z.shape} with {heads} heads")
    dk = d // heads
    Q = linear(Z, params["Wq"], params["bq"])
    K = linear(Z, params["Wk"], params["bk"])
    V = linear(Z, params["Wv"], params["bv"])
    outs, weights = [], []
    scale = 1.0 / math.sqrt(dk)
    for h in range(heads):
        sl = (slice(None), slice(h * dk, (h + 1) * dk))
        A = softmax_row(matmul(Q[sl], K[sl].T) * scale)
        weights.append(A.data)
        outs.append(matmul(A, V[sl]))
    out = linear(concat(outs, axis=1) if heads > 1 else outs[0], params["Wo"], params["bo"])
    return (out, weights) if return_weights else out


# ---------------------------------------------------------------------------
# initialization

def init_linear(rng, n_out: int, n_in: int):
    """Uniform(+-1/sqrt(fan_in)) weights and biases."""
    bound = 1.0 / math.sqrt(n_in)
    W = parameter(rng.uniform(-bound, bound, size=(n_out, n_in)))
    b = parameter(rng.uniform(-bound, bound, size=n_out))
    return W, b


def count_parameters(params: dict) -> int:
    return int(sum(p.data.size for p in params.values()))


# ---------------------------------------------------------------------------
# optimization

@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict, grads: dict) -> dict:
    """One Adam update with bias correction and coupled L2 decay.

    ``params`` and ``grads`` map names to arrays; returns the new arrays and
    mutates the moment buffers in ``state``.
    """
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    out = {}
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            out[name] = p
            continue
        if state.weight_decay:
            g = g + state.weight_decay * p
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        out[name] = p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return out


class Adam:
    """Stateful wrapper applying :func:`adam_step` to Tensor parameters in place."""

    def __init__(self, params: dict, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        self.params = params
        self.state = AdamState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps, weight_decay=weight_decay)

    @property
    def lr(self):
        return self.state.lr

    @lr.setter
    def lr(self, value):
        self.state.lr = value

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        arrays = {k: p.data for k, p in self.params.items()}
        grads = {k: p.grad for k, p in self.params.items() if p.grad is not None}
        for k, new in adam_step(self.state, arrays, grads).items():
            self.params[k].data = new


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` after ``patience`` epochs
    without an improvement of more than ``threshold`` in a maximized metric."""

    def __init__(self, factor: float = 0.1, patience: int = 10, threshold: float = 1e-6):
        self.factor = factor
        self.patience = patience
        self.threshold = threshold
        self.best = -math.inf
        self.stale = 0

    def step(self, value: float) -> bool:
        if value > self.best + self.threshold:
            self.best = value
            self.stale = 0
            return False
        self.stale += 1
        if self.stale >= self.patience:
            self.stale = 0
            return True
        return False


class EarlyStopping:
    def __init__(self, patience: int = 20, threshold: float = 1e-6):
        self.patience = patience
        self.threshold = threshold
        self.best = -math.inf
        self.stale = 0

    def step(self, value: float) -> bool:
        if value > self.best + self.threshold:
            self.best = value
            self.stale = 0
            return False
        self.stale += 1
        return self.stale >= self.patience


def plateau_scheduler(history, factor: float = 0.1, patience: int = 10, threshold: float = 1e-6) -> list:
    """Replay a validation-metric history; returns ``(epoch, factor)`` reduction events."""
    sched = PlateauScheduler(factor, patience, threshold)
    return [(i, factor) for i, v in enumerate(history) if sched.step(v)]


def early_stop(history, patience: int = 20, threshold: float = 1e-6) -> bool:
    stopper = EarlyStopping(patience, threshold)
    return any(stopper.step(v) for v in history)


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_MAGIC = b"SFCK"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, params: dict):
    """Write named arrays: header (magic, version, count) then per tensor
    name length, name, rank, dims and little-endian float64 data."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(params)))
        for name, t in params.items():
            arr = np.require(t.data if isinstance(t, Tensor) else t, dtype="<f8", requirements="C")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> dict:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    version, count = struct.unpack_from("<II", buf, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos = 12
    out = {}
    for _ in range(count):
        (n,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        name = buf[pos:pos + n].decode("utf-8")
        pos += n
        (rank,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        shape = struct.unpack_from(f"<{rank}Q", buf, pos)
        pos += 8 * rank
        size = int(np.prod(shape)) if rank else 1
        out[name] = np.frombuffer(buf, dtype="<f8", count=size, offset=pos).reshape(shape).copy()
        pos += 8 * size
    return out
