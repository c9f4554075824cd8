"""Fully connected pair classifier trained with binary cross-entropy and Adam.

The input is the concatenation ``[code_a, code_b]`` of two dense sparse codes;
hidden layers use ReLU (or tanh) and the single output unit a sigmoid.
"""

from dataclasses import dataclass, field, asdict

import numpy as np

from ._binio import Reader, Writer
from .coding import SparseCode, densify
from .errors import ConfigError, ShapeError, TrainingError

MAGIC = b"SPMN"
VERSION = 1
CLAMP = 1e-12


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z, h):
    return (z > 0).astype(z.dtype)


def _tanh_grad(z, h):
    return 1.0 - h * h


_ACTIVATIONS = {"relu": (_relu, _relu_grad), "tanh": (np.tanh, _tanh_grad)}


@dataclass(frozen=True)
class Architecture:
    hidden_sizes: tuple
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes",
                           tuple(int(h) for h in self.hidden_sizes))
        if any(h < 1 for h in self.hidden_sizes):
            raise ConfigError(f"hidden sizes must be >= 1: {self.hidden_sizes}")
        if self.activation not in _ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")

    def layer_sizes(self, input_dim):
        return (input_dim,) + self.hidden_sizes + (1,)


ARCH1 = Architecture((500, 80, 4))
ARCH2 = Architecture((1000,))


def architecture(name, hidden=None, activation="relu"):
    """Resolve ``"1"``/``"2"`` (optionally with rescaled hidden sizes)."""
    base = {"1": ARCH1, "2": ARCH2}.get(str(name))
    if base is None:
        raise ConfigError(f"architecture must be 1 or 2, got {name!r}")
    sizes = base.hidden_sizes if hidden is None else hidden
    if isinstance(sizes, int):
        sizes = (sizes,)
    return Architecture(tuple(sizes), activation)


@dataclass
class NetworkParams:
    weights: list
    biases: list
    arch: Architecture
    input_dim: int
    seed: int = 0

    def copy(self):
        return NetworkParams([w.copy() for w in self.weights],
                             [b.copy() for b in self.biases],
                             self.arch, self.input_dim, self.seed)

    def arrays(self):
        return self.weights + self.biases


@dataclass
class TrainConfig:
    batch_size: int = 64
    epochs: int = 50
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    val_split: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if not 0 < self.val_split < 1:
            raise ConfigError("val_split must lie in (0, 1)")
        if not self.lr > 0:
            raise ConfigError("lr must be > 0")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    best_epoch: int = -1

    def __len__(self):
        return len(self.train_loss)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("epoch,train_loss,train_acc,val_acc\n")
            for i, row in enumerate(zip(self.train_loss, self.train_acc,
                                        self.val_acc), 1):
                fh.write(f"{i},{row[0]!r},{row[1]!r},{row[2]!r}\n")


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls([np.zeros_like(a) for a in params.arrays()],
                   [np.zeros_like(a) for a in params.arrays()])


def sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def init_network(arch, input_dim, seed=0):
    """Fan-in scaled uniform weights, zero biases, reproducible from ``seed``."""
    if input_dim < 1:
        raise ConfigError(f"input_dim must be >= 1, got {input_dim}")
    rng = np.random.default_rng(seed)
    gain = 6.0 if arch.activation == "relu" else 3.0
    sizes = arch.layer_sizes(int(input_dim))
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(gain / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(weights, biases, arch, int(input_dim), int(seed))


def _check_batch(params, batch):
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim == 1:
        batch = batch[None, :]
    if batch.ndim != 2 or batch.shape[1] != params.input_dim:
        raise ShapeError(f"layer 0 expects inputs of width {params.input_dim}, "
                         f"got batch of shape {batch.shape}")
    return batch


def _forward_cache(params, batch):
    act, _ = _ACTIVATIONS[params.arch.activation]
    pre, post = [], [batch]
    h = batch
    n_layers = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        if h.shape[1] != w.shape[0]:
            raise ShapeError(f"layer {i} expects width {w.shape[0]}, got "
                             f"{h.shape[1]}")
        z = h @ w + b
        pre.append(z)
        h = act(z) if i < n_layers - 1 else sigmoid(z)
        post.append(h)
    return pre, post


def forward(params, batch):
    """Match probabilities for a ``(B, input_dim)`` batch, shape ``(B,)``."""
    batch = _check_batch(params, batch)
    _, post = _forward_cache(params, batch)
    return post[-1][:, 0]


def bce_loss(pred, labels):
    """Mean binary cross-entropy; predictions are clamped to ``[1e-12, 1 - 1e-12]``."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if pred.shape != labels.shape or pred.size == 0:
        raise ShapeError(f"pred {pred.shape} and labels {labels.shape} must be "
                         "equal, non-empty")
    p = np.clip(pred, CLAMP, 1.0 - CLAMP)
    return float(-np.mean(labels * np.log(p) + (1.0 - labels) * np.log1p(-p)))


def backward(params, batch, labels):
    """Gradients of the mean BCE loss for every weight and bias.

    Returns ``(grad_weights, grad_biases)`` as lists aligned with the params.
    """
    batch = _check_batch(params, batch)
    labels = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    if len(labels) != len(batch):
        raise ShapeError(f"{len(labels)} labels for {len(batch)} inputs")
    _, act_grad = _ACTIVATIONS[params.arch.activation]
    pre, post = _forward_cache(params, batch)
    # sigmoid followed by BCE: dE/dz = (y_hat - y) / N at the output unit
    delta = (post[-1] - labels) / len(batch)
    gw = [None] * len(params.weights)
    gb = [None] * len(params.weights)
    for i in range(len(params.weights) - 1, -1, -1):
        gw[i] = post[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ params.weights[i].T) * act_grad(pre[i - 1], post[i])
    return gw, gb


def adam_step(params, grads, state, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
              step_index=None):
    """One bias-corrected Adam update, applied in place; returns ``(params, state)``."""
    if step_index is None:
        step_index = state.step + 1
    if step_index < 1:
        raise ConfigError("step_index must be >= 1")
    gw, gb = grads
    flat_grads = list(gw) + list(gb)
    corr1 = 1.0 - beta1 ** step_index
    corr2 = 1.0 - beta2 ** step_index
    for p, g, m, v in zip(params.arrays(), flat_grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / corr1) / (np.sqrt(v / corr2) + eps)
    state.step = step_index
    return params, state


@dataclass
class PairSamples:
    """Labelled code pairs; ``a`` and ``b`` are dense ``(N, k)`` arrays."""

    a: np.ndarray
    b: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if not (self.a.shape == self.b.shape and len(self.a) == len(self.labels)):
            raise ShapeError(f"inconsistent pair arrays {self.a.shape}, "
                             f"{self.b.shape}, {self.labels.shape}")

    def __len__(self):
        return len(self.labels)

    @property
    def k(self):
        return self.a.shape[1]

    def inputs(self, index=slice(None)):
        return np.hstack([self.a[index], self.b[index]])

    @classmethod
    def from_codes(cls, codes, pairs):
        """Build samples from a list of codes and ``(idx_a, idx_b, label)`` rows."""
        dense = densify(codes)
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 3)
        return cls(dense[pairs[:, 0]], dense[pairs[:, 1]], pairs[:, 2])


def stratified_split(labels, val_fraction, seed):
    """Seeded per-class split; returns ``(train_index, val_index)``."""
    rng = np.random.default_rng(seed)
    train, val = [], []
    for cls in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == cls))
        n_val = int(round(len(members) * val_fraction))
        val.append(members[:n_val])
        train.append(members[n_val:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(val))


def accuracy(pred, labels):
    return float(np.mean((np.asarray(pred) > 0.5) == (np.asarray(labels) == 1)))


def train(samples, arch, cfg=None, params=None):
    """Mini-batch Adam on the BCE loss with a stratified validation hold-out.

    Returns the parameters from the epoch with the best validation accuracy
    (earliest on ties) and the per-epoch history.
    """
    cfg = cfg or TrainConfig()
    labels = samples.labels
    counts = np.bincount(labels, minlength=2)
    if len(counts) > 2 or counts.min() < 2:
        raise TrainingError(f"training needs >= 2 samples of each class, got "
                            f"counts {counts.tolist()}")
    if params is None:
        params = init_network(arch, 2 * samples.k, seed=cfg.seed)
    elif params.input_dim != 2 * samples.k:
        raise ShapeError(f"model input_dim {params.input_dim} != 2k = "
                         f"{2 * samples.k}")
    history = TrainHistory()
    if cfg.epochs == 0:
        return params, history

    train_idx, val_idx = stratified_split(labels, cfg.val_split, cfg.seed)
    x_train, y_train = samples.inputs(train_idx), labels[train_idx]
    x_val, y_val = samples.inputs(val_idx), labels[val_idx]
    rng = np.random.default_rng([cfg.seed, 1])
    state = AdamState.zeros_like(params)
    best, best_acc = params.copy(), -np.inf
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(y_train))
        loss_sum = correct = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            xb, yb = x_train[batch], y_train[batch]
            pred = forward(params, xb)
            loss_sum += bce_loss(pred, yb) * len(batch)
            correct += np.sum((pred > 0.5) == (yb == 1))
            grads = backward(params, xb, yb)
            adam_step(params, grads, state, cfg.lr, cfg.beta1, cfg.beta2,
                      cfg.eps)
        history.train_loss.append(loss_sum / len(order))
        history.train_acc.append(correct / len(order))
        val_acc = accuracy(forward(params, x_val), y_val)
        history.val_acc.append(val_acc)
        if val_acc > best_acc:
            best_acc, best = val_acc, params.copy()
            history.best_epoch = epoch
    return best, history


def predict_pair(params, code_a, code_b):
    """Match score for an ordered pair of codes (``a`` first, then ``b``)."""
    a = code_a.values if isinstance(code_a, SparseCode) else np.asarray(code_a)
    b = code_b.values if isinstance(code_b, SparseCode) else np.asarray(code_b)
    if len(a) != len(b) or 2 * len(a) != params.input_dim:
        raise ShapeError(f"code lengths {len(a)}, {len(b)} do not fit model "
                         f"input_dim {params.input_dim}")
    return float(forward(params, np.concatenate([a, b]))[0])


def save_model(params, path, config=None, meta=None):
    """SPMN checkpoint: arch, input_dim, seed, per-layer float64 tensors,
    training config echo and free-form meta, closed by a CRC32."""
    w = Writer(MAGIC, VERSION)
    w.text(params.arch.activation)
    w.u32(len(params.arch.hidden_sizes))
    for h in params.arch.hidden_sizes:
        w.u32(h)
    w.u32(params.input_dim)
    w.u32(params.seed)
    for weight, bias in zip(params.weights, params.biases):
        w.u32(weight.shape[0])
        w.u32(weight.shape[1])
        w.array(weight)
        w.array(bias)
    w.meta({k: repr(v) for k, v in asdict(config).items()} if config else {})
    w.meta(meta or {})
    w.save(path)


def load_model(path):
    """Return ``(params, config_echo, meta)`` from an SPMN checkpoint."""
    r = Reader.open(path, MAGIC, {VERSION})
    activation = r.text()
    hidden = tuple(r.u32() for _ in range(r.u32()))
    arch = Architecture(hidden, activation)
    input_dim, seed = r.u32(), r.u32()
    weights, biases = [], []
    for fan_in, fan_out in zip(arch.layer_sizes(input_dim)[:-1],
                               arch.layer_sizes(input_dim)[1:]):
        shape = (r.u32(), r.u32())
        if shape != (fan_in, fan_out):
            raise ShapeError(f"{path}: layer shape {shape} does not match "
                             f"architecture ({fan_in}, {fan_out})")
        weights.append(r.array(shape))
        biases.append(r.array((fan_out,)))
    config = r.meta()
    meta = r.meta()
    r.finish()
    return NetworkParams(weights, biases, arch, input_dim, seed), config, meta

