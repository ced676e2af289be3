"""Models, losses, analytic gradients, and the local SGD step.

Parameters live in a single flat float64 vector so that aggregation
strategies can treat every architecture uniformly.  Two architectures are
supported: multinomial logistic regression (strongly convex once
``weight_decay > 0``) and a one-hidden-layer tanh MLP as a minimal smooth
non-convex model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description from which the parameter layout follows."""

    kind: str  # "logistic-regression" | "mlp"
    input_dim: int
    num_classes: int
    hidden_dim: int = 32
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.kind not in ("logistic-regression", "mlp"):
            raise ConfigurationError(f"unknown model kind {self.kind!r}")
        if self.input_dim < 1 or self.num_classes < 2:
            raise ConfigurationError("input_dim must be >= 1 and num_classes >= 2")
        if self.kind == "mlp" and self.hidden_dim < 1:
            raise ConfigurationError("hidden_dim must be >= 1 for mlp")
        if self.weight_decay < 0:
            raise ConfigurationError("weight_decay must be nonnegative")


@dataclass(frozen=True)
class Batch:
    """A mini-batch of feature rows and integer class labels."""

    features: np.ndarray  # (batch_size, input_dim)
    labels: np.ndarray  # (batch_size,)


def param_count(model: ModelSpec) -> int:
    """Number of entries in the flat parameter vector."""
    d, c = model.input_dim, model.num_classes
    if model.kind == "logistic-regression":
        return d * c + c
    h = model.hidden_dim
    return d * h + h + h * c + c


def init_params(model: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    """Initial parameter vector.

    Logistic regression starts at zero.  MLP weights are uniform in
    [-r, r] with r = 1/sqrt(fan_in) per layer; biases start at zero.
    """
    if model.kind == "logistic-regression":
        return np.zeros(param_count(model))
    d, h, c = model.input_dim, model.hidden_dim, model.num_classes
    r1 = 1.0 / np.sqrt(d)
    r2 = 1.0 / np.sqrt(h)
    w1 = rng.uniform(-r1, r1, size=d * h)
    w2 = rng.uniform(-r2, r2, size=h * c)
    return np.concatenate([w1, np.zeros(h), w2, np.zeros(c)])


def _unpack_logreg(model: ModelSpec, w: np.ndarray):
    d, c = model.input_dim, model.num_classes
    return w[: d * c].reshape(d, c), w[d * c :]


def _unpack_mlp(model: ModelSpec, w: np.ndarray):
    d, h, c = model.input_dim, model.hidden_dim, model.num_classes
    o1 = d * h
    o2 = o1 + h
    o3 = o2 + h * c
    return (
        w[:o1].reshape(d, h),
        w[o1:o2],
        w[o2:o3].reshape(h, c),
        w[o3:],
    )


def _check_dims(model: ModelSpec, w: np.ndarray, features: np.ndarray):
    if w.shape != (param_count(model),):
        raise ConfigurationError(
            f"parameter vector has length {w.shape}, expected ({param_count(model)},)"
        )
    if features.ndim != 2 or features.shape[1] != model.input_dim:
        raise ConfigurationError(
            f"features have shape {features.shape}, expected (*, {model.input_dim})"
        )


def _logits(model: ModelSpec, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    if model.kind == "logistic-regression":
        wm, b = _unpack_logreg(model, w)
        return x @ wm + b
    w1, b1, w2, b2 = _unpack_mlp(model, w)
    return np.tanh(x @ w1 + b1) @ w2 + b2


def forward_loss(model: ModelSpec, w: np.ndarray, batch: Batch) -> float:
    """Mean softmax cross-entropy over the batch plus (weight_decay/2)*||w||^2."""
    _check_dims(model, w, batch.features)
    z = _logits(model, w, batch.features)
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    ce = float(np.mean(lse - z[np.arange(len(z)), batch.labels]))
    return ce + 0.5 * model.weight_decay * float(w @ w)


def gradient(model: ModelSpec, w: np.ndarray, batch: Batch) -> np.ndarray:
    """Analytic gradient of :func:`forward_loss` with respect to ``w``."""
    _check_dims(model, w, batch.features)
    x, y = batch.features, batch.labels
    n = len(x)
    if model.kind == "logistic-regression":
        z = x @ _unpack_logreg(model, w)[0] + _unpack_logreg(model, w)[1]
        p = np.exp(z - z.max(axis=1, keepdims=True))
        p /= p.sum(axis=1, keepdims=True)
        p[np.arange(n), y] -= 1.0
        p /= n
        g = np.concatenate([(x.T @ p).ravel(), p.sum(axis=0)])
    else:
        w1, b1, w2, b2 = _unpack_mlp(model, w)
        hidden = np.tanh(x @ w1 + b1)
        z = hidden @ w2 + b2
        p = np.exp(z - z.max(axis=1, keepdims=True))
        p /= p.sum(axis=1, keepdims=True)
        p[np.arange(n), y] -= 1.0
        p /= n
        dh = (p @ w2.T) * (1.0 - hidden * hidden)
        g = np.concatenate(
            [(x.T @ dh).ravel(), dh.sum(axis=0), (hidden.T @ p).ravel(), p.sum(axis=0)]
        )
    return g + model.weight_decay * w


def local_sgd(
    model: ModelSpec,
    w0: np.ndarray,
    shard,
    steps: int,
    eta: float,
    batch_size: int,
    rng: np.random.Generator,
    grad_offset: np.ndarray | None = None,
) -> np.ndarray:
    """Run ``steps`` mini-batch SGD steps from ``w0`` on one client's shard.

    Batches are consecutive slices of a per-epoch permutation drawn from
    ``rng``; a new permutation is drawn whenever the previous one is
    exhausted, and the final slice of an epoch may be smaller than
    ``batch_size``.  ``grad_offset``, when given, is added to every
    gradient before the step (used for control-variate corrections).
    The result is bitwise-deterministic given identical inputs.
    """
    if steps < 1:
        raise ConfigurationError("steps must be >= 1")
    if batch_size < 1:
        raise ConfigurationError("batch_size must be >= 1")
    n = len(shard.labels)
    if n == 0:
        raise DataError("cannot run local SGD on an empty shard")
    w = w0.copy()
    order = rng.permutation(n)
    cursor = 0
    for _ in range(steps):
        if cursor >= n:
            order = rng.permutation(n)
            cursor = 0
        idx = order[cursor : cursor + batch_size]
        cursor += batch_size
        batch = Batch(shard.features[idx], shard.labels[idx])
        g = gradient(model, w, batch)
        if grad_offset is not None:
            g = g + grad_offset
        w -= eta * g
    return w


def accuracy(model: ModelSpec, w: np.ndarray, shard) -> float:
    """Fraction of samples whose argmax class matches the label.

    Ties resolve to the lowest class index.
    """
    if len(shard.labels) == 0:
        raise DataError("cannot evaluate accuracy on an empty dataset")
    _check_dims(model, w, shard.features)
    pred = np.argmax(_logits(model, w, shard.features), axis=1)
    return float(np.mean(pred == shard.labels))
