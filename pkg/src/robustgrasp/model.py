"""Small softmax classifiers trained with plain SGD and hand-written backprop.

The training loop is the testbed for the losses: labels equal to -1 mark
samples whose ground truth was removed, and the loss mode decides whether
those samples are ignored or pseudo-labeled.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EmptyBatchError, InvalidInputError, ShapeMismatchError
from .losses import (
    LabeledBatch,
    LossReport,
    MissingLossConfig,
    NoisyLossConfig,
    UnlabeledBatch,
    ce_supervised,
    combined_missing_loss,
    sce_baseline,
    symmetric_noisy_loss,
)
from .prob_core import argmax_label

LOSS_MODES = ("ce", "pseudo", "smoothed_missing", "sce", "smoothed_noisy")
MISSING_MODES = ("pseudo", "smoothed_missing")


@dataclass
class PredictorParams:
    weights: list
    biases: list
    hidden_width: int = 0
    activation: str = "relu"

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def num_classes(self) -> int:
        return self.weights[-1].shape[0]

    def copy(self) -> "PredictorParams":
        return PredictorParams([w.copy() for w in self.weights],
                               [b.copy() for b in self.biases],
                               self.hidden_width, self.activation)

    def to_json(self) -> str:
        doc = {
            "hidden_width": self.hidden_width,
            "activation": self.activation,
            "layers": [
                {"shape": list(w.shape), "weights": w.ravel().tolist(), "biases": b.tolist()}
                for w, b in zip(self.weights, self.biases)
            ],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "PredictorParams":
        doc = json.loads(text)
        weights, biases = [], []
        for layer in doc["layers"]:
            weights.append(np.array(layer["weights"], dtype=np.float64).reshape(layer["shape"]))
            biases.append(np.array(layer["biases"], dtype=np.float64))
        return cls(weights, biases, int(doc["hidden_width"]), doc["activation"])


def init_params(input_dim: int, num_classes: int, hidden_width: int = 0,
                seed: int = 0) -> PredictorParams:
    """Uniform weights with variance ``1/fan_in`` and zero biases."""
    if input_dim < 1 or num_classes < 1 or hidden_width < 0:
        raise InvalidInputError("layer sizes must be positive")
    rng = np.random.default_rng(seed)
    sizes = [input_dim] + ([hidden_width] if hidden_width else []) + [num_classes]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = math.sqrt(3.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return PredictorParams(weights, biases, hidden_width)


def _check_features(params: PredictorParams, features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ShapeMismatchError(
            f"features of shape {x.shape} do not fit input dim {params.input_dim}")
    return x


def _forward_all(params, x):
    acts = [x]
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w.T + b
        if i < last:
            h = np.maximum(h, 0.0)
        acts.append(h)
    return acts


def forward(params: PredictorParams, features) -> np.ndarray:
    return _forward_all(params, _check_features(params, features))[-1]


def backward(params: PredictorParams, features, grad_logits):
    """Gradients of the loss w.r.t. every weight and bias.

    Returns ``(weight_grads, bias_grads)`` aligned with ``params``.
    """
    x = _check_features(params, features)
    g = np.asarray(grad_logits, dtype=np.float64)
    if g.shape != (x.shape[0], params.num_classes):
        raise ShapeMismatchError(f"gradient shape {g.shape} does not match logits")
    acts = _forward_all(params, x)
    w_grads = [None] * len(params.weights)
    b_grads = [None] * len(params.weights)
    for i in range(len(params.weights) - 1, -1, -1):
        w_grads[i] = g.T @ acts[i]
        b_grads[i] = g.sum(axis=0)
        if i:
            g = (g @ params.weights[i]) * (acts[i] > 0)
    return w_grads, b_grads


def evaluate(params: PredictorParams, features, labels) -> float:
    labels = np.asarray(labels)
    if labels.shape[0] == 0:
        raise EmptyBatchError("cannot evaluate on an empty dataset")
    pred = argmax_label(forward(params, features))
    return float(np.mean(pred == labels))


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 0.1
    seed: int = 0
    warmup_epochs: int = 10
    hidden_width: int = 0
    loss_mode: str = "ce"
    missing: MissingLossConfig = field(default_factory=MissingLossConfig)
    noisy: NoisyLossConfig = field(default_factory=NoisyLossConfig)

    def __post_init__(self):
        if self.loss_mode not in LOSS_MODES:
            raise ConfigError(f"unknown loss mode {self.loss_mode!r}")
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ConfigError("epochs, batch_size and learning_rate must be positive")
        if not 0 <= self.warmup_epochs <= self.epochs:
            raise ConfigError("warmup_epochs must lie in [0, epochs]")


def batch_loss(logits: np.ndarray, labels: np.ndarray, config: TrainConfig,
               pseudo_active: bool) -> LossReport:
    """Loss and per-row logit gradient for one mini-batch.

    Rows with label -1 are unlabeled. They are ignored except in the missing-
    label modes once ``pseudo_active`` is set. Returns ``None`` when the batch
    has nothing to learn from.
    """
    has_label = labels >= 0
    grad = np.zeros_like(logits)
    labeled = LabeledBatch.from_labels(logits[has_label], labels[has_label])
    if config.loss_mode in MISSING_MODES and pseudo_active and (~has_label).any():
        unlabeled = UnlabeledBatch(logits[~has_label])
        rep = combined_missing_loss(labeled, unlabeled, config.missing,
                                    hard_pseudo_labels=config.loss_mode == "pseudo")
        grad[has_label] = rep.grad_logits[:labeled.size]
        grad[~has_label] = rep.grad_logits[labeled.size:]
        return LossReport(rep.value, grad)
    if labeled.size == 0:
        return None
    if config.loss_mode == "sce":
        rep = sce_baseline(labeled, config.noisy)
    elif config.loss_mode == "smoothed_noisy":
        rep = symmetric_noisy_loss(labeled, config.noisy)
    else:
        rep = ce_supervised(labeled)
        if config.loss_mode in MISSING_MODES:
            rep = rep.scaled(config.missing.lambda1)
    grad[has_label] = rep.grad_logits
    return LossReport(rep.value, grad)


def train(train_data, val_data, config: TrainConfig, params: PredictorParams | None = None):
    """Mini-batch SGD. Returns ``(params, history)``.

    ``train_data`` and ``val_data`` are ``(features, labels)`` pairs; training
    labels may contain -1 for removed ground truth. Each epoch visits the
    samples in a seeded permutation; pseudo-labels are recomputed from the
    current model on every mini-batch once ``warmup_epochs`` have passed.
    """
    x, y = (np.asarray(a) for a in train_data)
    y = y.astype(np.int64)
    if x.shape[0] == 0:
        raise EmptyBatchError("training data is empty")
    if x.shape[0] != y.shape[0]:
        raise ShapeMismatchError("features and labels differ in length")
    if not (y >= 0).any():
        if config.loss_mode not in MISSING_MODES or config.warmup_epochs > 0:
            raise EmptyBatchError("no labeled samples to train on")
    if params is None:
        num_classes = max(int(y.max()), int(np.max(val_data[1]))) + 1
        params = init_params(x.shape[1], num_classes, config.hidden_width, config.seed)
    else:
        params = params.copy()
    rng = np.random.default_rng(config.seed)
    history = []
    n = x.shape[0]
    for epoch in range(config.epochs):
        pseudo_active = epoch >= config.warmup_epochs
        order = rng.permutation(n)
        total, steps = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb = x[idx]
            rep = batch_loss(forward(params, xb), y[idx], config, pseudo_active)
            if rep is None:
                continue
            w_grads, b_grads = backward(params, xb, rep.grad_logits)
            for w, gw in zip(params.weights, w_grads):
                w -= config.learning_rate * gw
            for b, gb in zip(params.biases, b_grads):
                b -= config.learning_rate * gb
            total += rep.value
            steps += 1
        history.append({
            "epoch": epoch,
            "train_loss": total / steps if steps else 0.0,
            "val_accuracy": evaluate(params, *val_data),
        })
    return params, history
