"""Two-hidden-layer perceptron (ReLU, softmax cross-entropy) trained by
mini-batch gradient descent with momentum."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch, NonFiniteLoss, SingleClassInput
from .standardize import Standardizer, check_rows

log = logging.getLogger(__name__)

HIDDEN = (512, 128)
N_CLASSES = 2


@dataclass(frozen=True)
class MlpConfig:
    epochs: int = 10_000
    lr: float = 1e-3
    momentum: float = 0.9
    batch: int = 32
    seed: int = 0
    hidden: tuple[int, ...] = HIDDEN


@dataclass(eq=False)
class MlpModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    standardizer: Standardizer | None = None
    config: MlpConfig = field(default_factory=MlpConfig)
    loss_history: list[float] = field(default_factory=list)
    snapshot: "MlpModel | None" = None
    info: dict = field(default_factory=dict)

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def width(self) -> int:
        return self.weights[0].shape[0]

    def logits(self, Z: np.ndarray) -> np.ndarray:
        h = Z
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ W + b, 0.0)
        return h @ self.weights[-1] + self.biases[-1]

    def predict_proba(self, X) -> np.ndarray:
        X = check_rows(X, self.width)
        Z = self.standardizer.transform(X) if self.standardizer is not None else X
        return softmax(self.logits(Z))

    def predict(self, X) -> np.ndarray:
        # argmax returns the first maximum, so ties go to class 0
        return np.argmax(self.predict_proba(X), axis=1)

    def copy(self) -> "MlpModel":
        return MlpModel([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                        self.standardizer, self.config, list(self.loss_history), None, dict(self.info))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def init_params(dims, rng: np.random.Generator):
    """Uniform fan-in scaled init, limit sqrt(6 / fan_in)."""
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        lim = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def loss_and_grads(weights, biases, Z: np.ndarray, y: np.ndarray):
    """Mean cross-entropy over the batch and its gradients for every parameter."""
    acts = [Z]
    pre = []
    h = Z
    for W, b in zip(weights[:-1], biases[:-1]):
        a = h @ W + b
        pre.append(a)
        h = np.maximum(a, 0.0)
        acts.append(h)
    logits = h @ weights[-1] + biases[-1]
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    n = len(y)
    loss = float(np.mean(logsum - z[np.arange(n), y]))
    delta = np.exp(z - logsum[:, None])
    delta[np.arange(n), y] -= 1.0
    delta /= n
    gw = [None] * len(weights)
    gb = [None] * len(biases)
    for layer in range(len(weights) - 1, -1, -1):
        gw[layer] = acts[layer].T @ delta
        gb[layer] = delta.sum(axis=0)
        if layer:
            delta = (delta @ weights[layer].T) * (pre[layer - 1] > 0)
    return loss, gw, gb


def _class_indices(labels) -> np.ndarray:
    y = np.asarray(labels)
    return (y.astype(np.float64) > 0).astype(np.intp)


def train_mlp(rows, labels, config: MlpConfig = MlpConfig(), val_rows=None, val_labels=None) -> MlpModel:
    """Train on standardized rows; labels are 1 (cribriform) vs 0/-1.

    Returns the final-epoch model. When a validation split is given,
    ``model.snapshot`` holds the parameters with the best validation
    accuracy (earliest epoch on ties).
    """
    X = check_rows(rows)
    y = _class_indices(labels)
    if len(y) != len(X):
        raise ValueError("rows and labels lengths differ")
    if len(np.unique(y)) < 2:
        raise SingleClassInput("MLP training needs both classes")
    std = Standardizer.fit(X)
    Z = std.transform(X)
    rng = np.random.default_rng(config.seed)
    dims = [Z.shape[1], *config.hidden, N_CLASSES]
    weights, biases = init_params(dims, rng)
    vel_w = [np.zeros_like(w) for w in weights]
    vel_b = [np.zeros_like(b) for b in biases]

    has_val = val_rows is not None and val_labels is not None and len(val_labels)
    if has_val:
        Zv = std.transform(check_rows(val_rows, Z.shape[1]))
        yv = _class_indices(val_labels)
    best_acc, best = -1.0, None
    history: list[float] = []
    n = len(y)
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch):
            idx = perm[start:start + config.batch]
            # overflow is reported below as NonFiniteLoss, not as numpy warnings
            with np.errstate(over="ignore", invalid="ignore"):
                loss, gw, gb = loss_and_grads(weights, biases, Z[idx], y[idx])
            if not np.isfinite(loss):
                raise NonFiniteLoss(
                    f"loss became {loss} at epoch {epoch}, batch {start // config.batch} "
                    f"(lr={config.lr}); try a lower learning rate"
                )
            total += loss * len(idx)
            for k in range(len(weights)):
                vel_w[k] = config.momentum * vel_w[k] - config.lr * gw[k]
                vel_b[k] = config.momentum * vel_b[k] - config.lr * gb[k]
                weights[k] += vel_w[k]
                biases[k] += vel_b[k]
        history.append(total / n)
        if (epoch + 1) % 1000 == 0:
            log.debug("epoch %d: train loss %.6g", epoch + 1, history[-1])
        if has_val:
            probe = MlpModel(weights, biases)
            acc = float(np.mean(np.argmax(probe.logits(Zv), axis=1) == yv))
            if acc > best_acc:
                best_acc = acc
                best = ([w.copy() for w in weights], [b.copy() for b in biases], epoch)
    model = MlpModel(weights, biases, std, config, history)
    if has_val and best is not None:
        model.snapshot = MlpModel(best[0], best[1], std, config, history[:best[2] + 1],
                                  info={"epoch": best[2], "val_accuracy": best_acc})
    elif has_val:
        # zero epochs: the initial parameters are the only candidate
        probe_acc = float(np.mean(np.argmax(model.logits(Zv), axis=1) == yv))
        model.snapshot = MlpModel([w.copy() for w in weights], [b.copy() for b in biases], std, config,
                                  [], info={"epoch": -1, "val_accuracy": probe_acc})
    return model


def predict_mlp(model: MlpModel, row) -> dict:
    """Class label (1 = cribriform, ties to 0) and class probabilities."""
    X = np.asarray(row, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.width:
        raise DimensionMismatch(f"row width {X.shape[1]} does not match model width {model.width}")
    p = model.predict_proba(X)[0]
    return {"label": int(np.argmax(p)), "probabilities": (float(p[0]), float(p[1]))}
