"""Differentiable classifiers over flat parameter vectors.

Two model kinds:

* ``logreg``  -- multinomial logistic regression.
* ``mlp``     -- one tanh hidden layer, then a linear output layer.

Parameters live in a single flat float64 vector, layer-major and row-major
within each layer:

* logreg: ``[W (C x F), b (C)]``
* mlp:    ``[W1 (H x F), b1 (H), W2 (C x H), b2 (C)]``

The loss is mean categorical cross-entropy in nats, stabilised with
log-sum-exp, and gradients are exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .rng import stream

MODEL_KINDS = ("logreg", "mlp")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    n_features: int
    n_classes: int
    hidden: int = 0
    init_seed: int = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}, expected one of {MODEL_KINDS}")
        if self.n_classes < 2:
            raise ValueError(f"n_classes must be >= 2, got {self.n_classes}")
        if self.n_features < 1:
            raise ValueError(f"n_features must be >= 1, got {self.n_features}")
        if self.kind == "mlp" and self.hidden < 1:
            raise ValueError(f"mlp needs hidden >= 1, got {self.hidden}")


@dataclass(frozen=True)
class LossReport:
    loss: float
    accuracy: float


def param_dim(spec: ModelSpec) -> int:
    f, c, h = spec.n_features, spec.n_classes, spec.hidden
    if spec.kind == "logreg":
        return c * f + c
    return h * f + h + c * h + c


def unflatten(spec: ModelSpec, params: np.ndarray) -> list[np.ndarray]:
    """Views of the flat vector as per-layer arrays (weights then biases)."""
    if params.shape != (param_dim(spec),):
        raise ValueError(f"params length {params.shape[0]} does not match spec dim {param_dim(spec)}")
    f, c, h = spec.n_features, spec.n_classes, spec.hidden
    if spec.kind == "logreg":
        return [params[: c * f].reshape(c, f), params[c * f :]]
    o = 0
    w1 = params[o : o + h * f].reshape(h, f)
    o += h * f
    b1 = params[o : o + h]
    o += h
    w2 = params[o : o + c * h].reshape(c, h)
    o += c * h
    return [w1, b1, w2, params[o:]]


def flatten(parts: list[np.ndarray]) -> np.ndarray:
    return np.concatenate([p.ravel() for p in parts])


def init_params(spec: ModelSpec) -> np.ndarray:
    """Gaussian weights with scale 1/sqrt(fan_in), zero biases."""
    rng = stream(spec.init_seed, "init")
    f, c, h = spec.n_features, spec.n_classes, spec.hidden
    if spec.kind == "logreg":
        w = rng.standard_normal((c, f)) / np.sqrt(f)
        return flatten([w, np.zeros(c)])
    w1 = rng.standard_normal((h, f)) / np.sqrt(f)
    w2 = rng.standard_normal((c, h)) / np.sqrt(h)
    return flatten([w1, np.zeros(h), w2, np.zeros(c)])


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=1, keepdims=True)
    shifted = logits - m
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss_and_grad(
    spec: ModelSpec, params: np.ndarray, batch: tuple[np.ndarray, np.ndarray]
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over a batch and its exact gradient."""
    x, y = batch
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = x.shape[0]
    if n == 0:
        raise ValueError("batch is empty")

    if spec.kind == "logreg":
        w, b = unflatten(spec, params)
        logits = x @ w.T + b
        hidden = None
    else:
        w1, b1, w2, b2 = unflatten(spec, params)
        hidden = np.tanh(x @ w1.T + b1)
        logits = hidden @ w2.T + b2

    logp = _log_softmax(logits)
    loss = float(-logp[np.arange(n), y].mean())
    if not np.isfinite(loss):
        raise ArithmeticError("loss is non-finite")

    dlogits = np.exp(logp)
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n

    if spec.kind == "logreg":
        grad = flatten([dlogits.T @ x, dlogits.sum(axis=0)])
    else:
        gw2 = dlogits.T @ hidden
        gb2 = dlogits.sum(axis=0)
        dhidden = (dlogits @ w2) * (1.0 - hidden * hidden)
        grad = flatten([dhidden.T @ x, dhidden.sum(axis=0), gw2, gb2])
    return loss, grad


def evaluate(spec: ModelSpec, params: np.ndarray, data: Dataset) -> LossReport:
    """Full-dataset mean loss and accuracy.

    Argmax ties resolve to the lowest class index.
    """
    x, y = data.features, data.labels
    if spec.kind == "logreg":
        w, b = unflatten(spec, params)
        logits = x @ w.T + b
    else:
        w1, b1, w2, b2 = unflatten(spec, params)
        logits = np.tanh(x @ w1.T + b1) @ w2.T + b2
    logp = _log_softmax(logits)
    loss = float(-logp[np.arange(len(data)), y].mean())
    accuracy = float((logits.argmax(axis=1) == y).mean())
    return LossReport(loss=loss, accuracy=accuracy)
