"""Dense ReLU network with hand-written reverse-mode gradients.

Weights are stored in one flat float64 vector; each layer is a view into it,
with weight matrices shaped (fan_in, fan_out) so a batch is pushed through as
``x @ W + b``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Architecture:
    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2:
            raise ValueError("architecture needs at least an input and an output size")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    def shapes(self) -> list[tuple[tuple[int, int], int]]:
        """Per layer: ((rows, cols) of the weight matrix, bias length)."""
        return [((a, b), b) for a, b in zip(self.layer_sizes[:-1], self.layer_sizes[1:])]

    @property
    def n_params(self) -> int:
        return sum(r * c + b for (r, c), b in self.shapes())


@dataclass
class Params:
    arch: Architecture
    values: np.ndarray
    _views: list = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != (self.arch.n_params,):
            raise ValueError(
                f"expected {self.arch.n_params} parameters for {self.arch.layer_sizes}, "
                f"got shape {self.values.shape}"
            )
        self._views = _split(self.values, self.arch)

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return self._views

    def copy(self) -> "Params":
        return Params(self.arch, self.values.copy())

    def with_values(self, values: np.ndarray) -> "Params":
        return Params(self.arch, values)


def _split(flat: np.ndarray, arch: Architecture) -> list[tuple[np.ndarray, np.ndarray]]:
    out = []
    pos = 0
    for (rows, cols), nb in arch.shapes():
        w = flat[pos:pos + rows * cols].reshape(rows, cols)
        pos += rows * cols
        b = flat[pos:pos + nb]
        pos += nb
        out.append((w, b))
    return out


def init_params(arch: Architecture, scheme: str = "glorot_uniform", seed: int = 0,
                low: float = -0.05, high: float = 0.05) -> Params:
    """Initialise weights; biases always start at zero.

    ``scheme`` is one of ``glorot_uniform``, ``uniform`` (on [low, high]) or ``zeros``.
    """
    rng = np.random.default_rng(seed)
    values = np.zeros(arch.n_params)
    p = Params(arch, values)
    if scheme == "zeros":
        return p
    for w, _ in p.layers():
        fan_in, fan_out = w.shape
        if scheme == "glorot_uniform":
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            w[...] = rng.uniform(-limit, limit, size=w.shape)
        elif scheme == "uniform":
            w[...] = rng.uniform(low, high, size=w.shape)
        else:
            raise ValueError(f"unknown init scheme {scheme!r}")
    return p


def _check_input(p: Params, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.arch.input_dim:
        raise ValueError(f"input dim {x.shape[-1]} does not match architecture input {p.arch.input_dim}")
    return x


def forward(p: Params, x: np.ndarray) -> np.ndarray:
    """Logits for a single input vector or an (n, d) batch."""
    h = _check_input(p, x)
    layers = p.layers()
    for i, (w, b) in enumerate(layers):
        h = h @ w + b
        if i < len(layers) - 1:
            h = np.maximum(h, 0.0)
    return h


def _forward_cache(p: Params, x: np.ndarray):
    acts = [x]
    pre = []
    layers = p.layers()
    h = x
    for i, (w, b) in enumerate(layers):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < len(layers) - 1 else z
        acts.append(h)
    return acts, pre


def log_softmax(logits: np.ndarray) -> np.ndarray:
    m = np.max(logits, axis=-1, keepdims=True)
    shifted = logits - m
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    m = np.max(logits, axis=-1, keepdims=True)
    e = np.exp(logits - m)
    return e / np.sum(e, axis=-1, keepdims=True)


def loss(logits: np.ndarray, label: int) -> float:
    """Softmax cross-entropy (natural log) of one logit vector."""
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < logits.shape[-1]:
        raise ValueError(f"label {label} outside [0, {logits.shape[-1]})")
    return float(-log_softmax(logits)[label])


def losses(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-example cross-entropy for an (n, C) batch."""
    labels = np.asarray(labels)
    return -log_softmax(logits)[np.arange(len(labels)), labels]


def batch_loss(p: Params, x: np.ndarray, labels: np.ndarray) -> np.ndarray:
    return losses(forward(p, np.atleast_2d(x)), np.atleast_1d(labels))


def loss_and_grad(p: Params, x: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean batch loss and its gradient w.r.t. the flat parameter vector."""
    x = np.atleast_2d(_check_input(p, x))
    labels = np.atleast_1d(labels)
    n = x.shape[0]
    acts, pre = _forward_cache(p, x)
    logits = pre[-1]
    lsm = log_softmax(logits)
    value = float(-np.mean(lsm[np.arange(n), labels]))

    dz = np.exp(lsm)
    dz[np.arange(n), labels] -= 1.0
    dz /= n

    grad = np.empty_like(p.values)
    grad_views = _split(grad, p.arch)
    layers = p.layers()
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        gw, gb = grad_views[i]
        gw[...] = acts[i].T @ dz
        gb[...] = dz.sum(axis=0)
        if i > 0:
            dz = (dz @ w.T) * (pre[i - 1] > 0)
    return value, grad


def grad_params(p: Params, x: np.ndarray, labels: np.ndarray) -> np.ndarray:
    return loss_and_grad(p, x, labels)[1]


def input_loss_and_grad(p: Params, x: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-example losses and per-example gradients w.r.t. the inputs.

    Row i of the gradient is d loss_i / d x_i; the parameter gradient is never formed.
    """
    x2 = np.atleast_2d(_check_input(p, x))
    labels = np.atleast_1d(labels)
    n = x2.shape[0]
    acts, pre = _forward_cache(p, x2)
    lsm = log_softmax(pre[-1])
    values = -lsm[np.arange(n), labels]
    dz = np.exp(lsm)
    dz[np.arange(n), labels] -= 1.0
    layers = p.layers()
    for i in range(len(layers) - 1, 0, -1):
        dz = (dz @ layers[i][0].T) * (pre[i - 1] > 0)
    gx = dz @ layers[0][0].T
    if np.ndim(x) == 1:
        return values, gx[0]
    return values, gx


def grad_input(p: Params, x: np.ndarray, label: int) -> np.ndarray:
    return input_loss_and_grad(p, x, np.array([label]))[1]


def predict(p: Params, x: np.ndarray) -> np.ndarray:
    return np.argmax(forward(p, np.atleast_2d(x)), axis=1)


# --- optimizers -------------------------------------------------------------

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int, **kw) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), **kw)


def adam_step(values: np.ndarray, grad: np.ndarray, state: AdamState, lr: float) -> tuple[np.ndarray, AdamState]:
    if values.shape != grad.shape:
        raise ValueError("parameter and gradient lengths differ")
    t = state.t + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grad
    v = state.beta2 * state.v + (1 - state.beta2) * grad * grad
    m_hat = m / (1 - state.beta1 ** t)
    v_hat = v / (1 - state.beta2 ** t)
    new = values - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new, AdamState(m, v, t, state.beta1, state.beta2, state.eps)


def sgd_step(values: np.ndarray, grad: np.ndarray, lr: float, weight_decay: float = 0.0,
             momentum_state: np.ndarray | None = None, momentum: float = 0.0):
    """Plain / momentum SGD with coupled L2 weight decay.

    Returns ``(new_values, new_momentum_state)``; the state is None when momentum is 0.
    """
    if values.shape != grad.shape:
        raise ValueError("parameter and gradient lengths differ")
    step = grad + weight_decay * values
    if momentum:
        buf = step.copy() if momentum_state is None else momentum * momentum_state + step
        return values - lr * buf, buf
    return values - lr * step, None


class Optimizer:
    """Small stateful wrapper so training loops can swap Adam for SGD."""

    def __init__(self, kind: str = "adam", lr: float = 1e-3, weight_decay: float = 0.0, momentum: float = 0.0):
        if kind not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {kind!r}")
        self.kind, self.lr, self.weight_decay, self.momentum = kind, lr, weight_decay, momentum
        self.state = None

    def step(self, values: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.kind == "adam":
            if self.state is None:
                self.state = AdamState.zeros(values.size)
            if self.weight_decay:
                grad = grad + self.weight_decay * values
            new, self.state = adam_step(values, grad, self.state, self.lr)
            return new
        new, self.state = sgd_step(values, grad, self.lr, self.weight_decay, self.state, self.momentum)
        return new

    def reset(self):
        self.state = None


# --- checkpoints ------------------------------------------------------------

def save_checkpoint(path, p: Params, **meta) -> Path:
    """Write an .npz container: raw float64 params plus a JSON metadata blob."""
    path = Path(path)
    header = {"version": CHECKPOINT_VERSION, "layer_sizes": list(p.arch.layer_sizes), **meta}
    with open(path, "wb") as fh:
        np.savez(fh, params=p.values, meta=np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8))
    return path


def load_checkpoint(path) -> tuple[Params, dict]:
    with np.load(Path(path)) as z:
        meta = json.loads(z["meta"].tobytes().decode())
        values = z["params"].copy()
    if meta.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
    return Params(Architecture(tuple(meta["layer_sizes"])), values), meta
