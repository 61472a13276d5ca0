"""Numpy multilayer perceptron: Dense -> ReLU -> BatchNorm hidden blocks and a
softmax output, trained with Adam and validation-loss early stopping.

All arithmetic is float64.  Parameters live in a flat ``dict`` keyed
``W0, b0, gamma0, beta0, ..., W{L}, b{L}``; batch-norm running statistics are
kept separately in ``running`` (``mean{i}``, ``var{i}``).
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import NumericError
from .tabular import EncodedMatrix

LOSSES = ("cross_entropy", "squared_error")


@dataclass(frozen=True)
class MlpConfig:
    hidden_sizes: tuple = (128, 128)
    learning_rate: float = 3e-4
    batch_size: int = 64
    max_epochs: int = 300
    early_stop_patience: int = 30
    loss: str = "cross_entropy"
    seed: int = 0
    bn_epsilon: float = 1e-5
    bn_momentum: float = 0.9
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}; expected one of {LOSSES}")
        if any(h <= 0 for h in self.hidden_sizes) or self.batch_size < 2:
            raise ValueError("hidden sizes must be positive and batch_size >= 2")
        if self.max_epochs < 1 or self.early_stop_patience < 1:
            raise ValueError("max_epochs and early_stop_patience must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")


@dataclass
class TrainingTrace:
    epochs_run: int = 0
    best_val_loss: float = math.inf
    best_epoch: int = 0
    val_losses: list = field(default_factory=list)


@dataclass
class MlpModel:
    params: dict
    running: dict
    config: MlpConfig
    trace: TrainingTrace = field(default_factory=TrainingTrace)
    feature_names: tuple = ()
    class_names: tuple = ()

    @property
    def n_hidden(self) -> int:
        return len(self.config.hidden_sizes)

    @property
    def input_dim(self) -> int:
        return self.params["W0"].shape[0]

    @property
    def n_classes(self) -> int:
        return self.params[f"W{self.n_hidden}"].shape[1]

    def copy(self) -> "MlpModel":
        return copy.deepcopy(self)


def init_model(input_dim: int, n_classes: int, config: MlpConfig,
               rng: np.random.Generator | None = None) -> MlpModel:
    """Glorot-uniform weights, zero biases, unit BN scale, zero BN shift."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    sizes = (input_dim, *config.hidden_sizes, n_classes)
    params, running = {}, {}
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        params[f"W{i}"] = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        params[f"b{i}"] = np.zeros(fan_out)
        if i < len(config.hidden_sizes):
            params[f"gamma{i}"] = np.ones(fan_out)
            params[f"beta{i}"] = np.zeros(fan_out)
            running[f"mean{i}"] = np.zeros(fan_out)
            running[f"var{i}"] = np.ones(fan_out)
    return MlpModel(params, running, config)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def batch_norm(x: np.ndarray, eps: float):
    """Train-mode normalization with batch statistics (biased variance)."""
    mu = x.mean(axis=0)
    var = x.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + eps)
    return (x - mu) * inv_std, mu, var, inv_std


def _forward(params, running, X, n_hidden, eps, train):
    cache = []
    a = X
    for i in range(n_hidden):
        z = a @ params[f"W{i}"] + params[f"b{i}"]
        r = relu(z)
        if train:
            xhat, mu, var, inv_std = batch_norm(r, eps)
        else:
            mu, var = running[f"mean{i}"], running[f"var{i}"]
            inv_std = 1.0 / np.sqrt(var + eps)
            xhat = (r - mu) * inv_std
        out = params[f"gamma{i}"] * xhat + params[f"beta{i}"]
        cache.append((a, z, xhat, inv_std, mu, var))
        a = out
    logits = a @ params[f"W{n_hidden}"] + params[f"b{n_hidden}"]
    return logits, a, cache


def forward(m: MlpModel, batch, mode: str = "infer") -> np.ndarray:
    """Class probabilities for ``batch``.

    ``train`` mode normalizes with batch statistics and folds them into the
    running averages; ``infer`` mode uses the running averages.
    """
    X = np.asarray(batch, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != m.input_dim:
        raise ValueError(f"expected batch of width {m.input_dim}, got shape {X.shape}")
    if mode not in ("train", "infer"):
        raise ValueError(f"unknown mode {mode!r}")
    train = mode == "train"
    if train and X.shape[0] < 2:
        raise ValueError("train-mode forward needs at least 2 rows")
    logits, _, cache = _forward(m.params, m.running, X, m.n_hidden, m.config.bn_epsilon, train)
    if train:
        _update_running(m, cache)
    return softmax(logits)


def _update_running(m: MlpModel, cache):
    mom = m.config.bn_momentum
    for i, (_, _, _, _, mu, var) in enumerate(cache):
        m.running[f"mean{i}"] = mom * m.running[f"mean{i}"] + (1.0 - mom) * mu
        m.running[f"var{i}"] = mom * m.running[f"var{i}"] + (1.0 - mom) * var


def one_hot_targets(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def loss(pred, target, kind: str = "cross_entropy") -> float:
    """Mean per-sample loss of probability rows ``pred`` against one-hot ``target``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    m = pred.shape[0]
    if kind == "squared_error":
        return float(((target - pred) ** 2).sum() / m)
    if kind == "cross_entropy":
        mask = target > 0
        with np.errstate(divide="ignore"):
            return float(-(target[mask] * np.log(pred[mask])).sum() / m)
    raise ValueError(f"unknown loss {kind!r}")


def loss_and_grads(params, X, Y, config: MlpConfig, running=None):
    """Train-mode loss and the gradient of every parameter.

    Returns ``(loss, grads, cache)``; ``cache`` holds the per-layer batch
    statistics for updating the running averages.
    """
    n_hidden = len(config.hidden_sizes)
    n = X.shape[0]
    logits, a_last, cache = _forward(params, running, X, n_hidden, config.bn_epsilon, True)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    p = np.exp(shifted - log_norm)
    if config.loss == "cross_entropy":
        value = float(-(Y * (shifted - log_norm)).sum() / n)
        dlogits = (p - Y) / n
    else:
        value = float(((Y - p) ** 2).sum() / n)
        dp = 2.0 * (p - Y) / n
        dlogits = p * (dp - (dp * p).sum(axis=1, keepdims=True))

    grads = {}
    L = n_hidden
    grads[f"W{L}"] = a_last.T @ dlogits
    grads[f"b{L}"] = dlogits.sum(axis=0)
    da = dlogits @ params[f"W{L}"].T
    for i in reversed(range(n_hidden)):
        a_prev, z, xhat, inv_std, _, _ = cache[i]
        grads[f"gamma{i}"] = (da * xhat).sum(axis=0)
        grads[f"beta{i}"] = da.sum(axis=0)
        dxhat = da * params[f"gamma{i}"]
        dr = inv_std / n * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
        dz = dr * (z > 0)
        grads[f"W{i}"] = a_prev.T @ dz
        grads[f"b{i}"] = dz.sum(axis=0)
        if i > 0:
            da = dz @ params[f"W{i}"].T
    return value, grads, cache


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def train_step(model: MlpModel, batch, targets, adam_state: AdamState | None = None):
    """One forward/backward pass and Adam update; mutates and returns the model."""
    cfg = model.config
    X = np.asarray(batch, dtype=np.float64)
    Y = np.asarray(targets, dtype=np.float64)
    if X.shape[0] < 2:
        raise ValueError("a training batch needs at least 2 rows")
    state = adam_state if adam_state is not None else AdamState()
    value, grads, cache = loss_and_grads(model.params, X, Y, cfg)
    if not math.isfinite(value):
        raise NumericError("non-finite training loss", seed=cfg.seed)
    _update_running(model, cache)
    state.step += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, g in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        mt = state.m[name]
        vt = state.v[name]
        mt *= b1
        mt += (1.0 - b1) * g
        vt *= b2
        vt += (1.0 - b2) * g * g
        model.params[name] = model.params[name] - cfg.learning_rate * (mt / c1) / (
            np.sqrt(vt / c2) + cfg.adam_epsilon)
    return model, state, value


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        if idx.size >= 2:  # batch norm is undefined on a single row
            yield idx


def fit(config: MlpConfig, train: EncodedMatrix, val: EncodedMatrix,
        val_loss_hook: Optional[Callable[[int, MlpModel], float]] = None) -> MlpModel:
    """Train with seeded per-epoch shuffling and early stopping.

    After every epoch the validation loss (or ``val_loss_hook(epoch, model)``
    when given) is compared with the best so far; ``early_stop_patience``
    epochs without a strictly lower value stop training, and the parameters
    of the best epoch are restored.
    """
    if train.n_rows == 0:
        raise ValueError("empty training set")
    if train.values.shape[1] != val.values.shape[1]:
        raise ValueError("train and validation widths differ")
    if train.class_names and val.class_names and train.class_names != val.class_names:
        raise ValueError("train and validation class lists differ")
    k = len(train.class_names) or int(max(train.labels.max(), val.labels.max())) + 1
    rng = np.random.default_rng(config.seed)
    model = init_model(train.values.shape[1], k, config, rng)
    model.feature_names = train.feature_names
    model.class_names = train.class_names
    X, Y = train.values, one_hot_targets(train.labels, k)
    Yval = one_hot_targets(val.labels, k)
    state = AdamState()
    trace = model.trace
    best = (model.params, model.running)
    wait = 0
    for epoch in range(1, config.max_epochs + 1):
        for idx in _batches(X.shape[0], config.batch_size, rng):
            train_step(model, X[idx], Y[idx], state)
        if val_loss_hook is not None:
            v = float(val_loss_hook(epoch, model))
        else:
            v = loss(forward(model, val.values, "infer"), Yval, config.loss)
        if not math.isfinite(v):
            raise NumericError(f"non-finite validation loss at epoch {epoch}", seed=config.seed)
        trace.epochs_run = epoch
        trace.val_losses.append(v)
        if v < trace.best_val_loss:
            trace.best_val_loss = v
            trace.best_epoch = epoch
            best = (copy.deepcopy(model.params), copy.deepcopy(model.running))
            wait = 0
        else:
            wait += 1
            if wait >= config.early_stop_patience:
                break
    model.params, model.running = best
    return model


def predict_proba(m: MlpModel, batch) -> np.ndarray:
    return forward(m, batch, "infer")


def predict(m: MlpModel, batch) -> np.ndarray:
    """Arg-max class per row; ties resolve to the lowest index."""
    return np.argmax(forward(m, batch, "infer"), axis=1)


def accuracy(m: MlpModel, data: EncodedMatrix) -> float:
    return float(np.mean(predict(m, data.values) == data.labels))


FORMAT = "igrf-mlp/1"


def save_model(m: MlpModel, path) -> None:
    """JSON: shapes plus row-major values for parameters and BN statistics."""
    def pack(arrays):
        return {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in arrays.items()}

    cfg = asdict(m.config)
    cfg["hidden_sizes"] = list(cfg["hidden_sizes"])
    doc = {
        "format": FORMAT,
        "config": cfg,
        "feature_names": list(m.feature_names),
        "class_names": list(m.class_names),
        "params": pack(m.params),
        "running": pack(m.running),
        "trace": asdict(m.trace),
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_model(path) -> MlpModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != FORMAT:
        raise ValueError(f"{path}: not an {FORMAT} model file")

    def unpack(d):
        return {k: np.array(v["data"], dtype=np.float64).reshape(v["shape"]) for k, v in d.items()}

    return MlpModel(unpack(doc["params"]), unpack(doc["running"]), MlpConfig(**doc["config"]),
                    TrainingTrace(**doc["trace"]), tuple(doc["feature_names"]),
                    tuple(doc["class_names"]))
