"""Robust losses for missing and noisy labels, with hand-derived gradients.

Every function returns a :class:`LossReport` holding the mean loss in nats and
the gradient with respect to the logits. Targets built from model outputs
(hard pseudo-labels, smoothed self-targets) and smoothed label distributions
are held constant when differentiating.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyBatchError, InvalidInputError, ShapeMismatchError
from .prob_core import (
    argmax_label,
    check_coefficient,
    confidence_gate,
    log_softmax,
    one_hot,
    smooth_distribution,
    softmax,
)

DEFAULT_LOG_FLOOR = -4.0


@dataclass(frozen=True)
class LabeledBatch:
    logits: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        if logits.ndim != 2 or targets.shape != logits.shape:
            raise ShapeMismatchError(
                f"logits {logits.shape} and targets {targets.shape} must both be (N, C)")
        if targets.size and not (
                np.all((targets == 0) | (targets == 1))
                and np.all(targets.sum(axis=1) == 1)):
            raise InvalidInputError("targets must be one-hot rows")
        object.__setattr__(self, "logits", logits)
        object.__setattr__(self, "targets", targets)

    @classmethod
    def from_labels(cls, logits, labels) -> "LabeledBatch":
        logits = np.asarray(logits, dtype=np.float64)
        return cls(logits, one_hot(labels, logits.shape[-1]))

    @property
    def size(self) -> int:
        return self.logits.shape[0]


@dataclass(frozen=True)
class UnlabeledBatch:
    logits: np.ndarray

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        if logits.ndim != 2:
            raise ShapeMismatchError(f"logits must be (N, C), got {logits.shape}")
        object.__setattr__(self, "logits", logits)

    @property
    def size(self) -> int:
        return self.logits.shape[0]


@dataclass(frozen=True)
class MissingLossConfig:
    """Settings for the pseudo-label losses.

    ``normalize_by_gated`` divides by the number of confident samples instead
    of the whole unlabeled count.
    """

    gamma: float = 0.95
    xi: float = 0.9
    lambda1: float = 1.0
    lambda2: float = 1.0
    normalize_by_gated: bool = False

    def __post_init__(self):
        check_coefficient(self.gamma, "gamma")
        check_coefficient(self.xi, "xi")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise InvalidInputError("lambda weights must be non-negative")


@dataclass(frozen=True)
class NoisyLossConfig:
    """Settings for the symmetric losses.

    ``literal_paper_smoothing`` smooths the predicted distribution instead of
    the observed label, which makes the loss ignore the label altogether.
    """

    delta: float = 0.8
    alpha1: float = 1.0
    alpha2: float = 1.0
    log_floor: float = DEFAULT_LOG_FLOOR
    literal_paper_smoothing: bool = False

    def __post_init__(self):
        check_coefficient(self.delta, "delta")
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise InvalidInputError("alpha weights must be non-negative")
        if not (np.isfinite(self.log_floor) and self.log_floor < 0):
            raise InvalidInputError("log_floor must be finite and negative")


@dataclass
class LossReport:
    value: float
    grad_logits: np.ndarray | None
    grads: dict = field(default_factory=dict)

    def scaled(self, weight: float) -> "LossReport":
        return LossReport(
            weight * self.value,
            None if self.grad_logits is None else weight * self.grad_logits,
            {k: weight * v for k, v in self.grads.items()},
        )


def _require_rows(n: int):
    if n == 0:
        raise EmptyBatchError("loss needs at least one sample")


def cross_entropy_rows(logits, targets):
    """Per-row ``-sum t log softmax(g)`` and its gradient ``p * sum(t) - t``."""
    logp = log_softmax(logits)
    p = np.exp(logp)
    values = -(targets * logp).sum(axis=1)
    grads = p * targets.sum(axis=1, keepdims=True) - targets
    return values, grads


def reverse_rows(logits, log_targets):
    """Per-row ``-sum softmax(g) k`` with ``k`` constant, and its gradient."""
    p = softmax(logits)
    values = -(p * log_targets).sum(axis=1)
    grads = -p * (log_targets - (p * log_targets).sum(axis=1, keepdims=True))
    return values, grads


def ce_supervised(batch: LabeledBatch) -> LossReport:
    n = batch.size
    _require_rows(n)
    values, grads = cross_entropy_rows(batch.logits, batch.targets)
    return LossReport(float(values.sum() / n), grads / n)


def _gated_self_target_loss(batch, gamma, targets_from, normalize_by_gated):
    n = batch.size
    _require_rows(n)
    p = softmax(batch.logits)
    keep = confidence_gate(p, gamma)
    targets = targets_from(p) * keep[:, None]
    values, grads = cross_entropy_rows(batch.logits, targets)
    denom = max(int(keep.sum()), 1) if normalize_by_gated else n
    return LossReport(float(values.sum() / denom), grads / denom)


def pseudo_label_loss(batch: UnlabeledBatch, gamma: float,
                      normalize_by_gated: bool = False) -> LossReport:
    """Hard pseudo-label cross-entropy on confident unlabeled samples."""
    def hard(p):
        return one_hot(argmax_label(p), p.shape[1])
    return _gated_self_target_loss(batch, gamma, hard, normalize_by_gated)


def smoothed_unlabeled_loss(batch: UnlabeledBatch,
                            config: MissingLossConfig) -> LossReport:
    """Cross-entropy against the smoothed copy of each confident prediction."""
    def soft(p):
        return smooth_distribution(p, config.xi)
    return _gated_self_target_loss(batch, config.gamma, soft, config.normalize_by_gated)


def combined_missing_loss(labeled: LabeledBatch, unlabeled: UnlabeledBatch,
                          config: MissingLossConfig,
                          hard_pseudo_labels: bool = False) -> LossReport:
    """Weighted sum of supervised and unlabeled terms.

    The gradient stacks labeled rows first, then unlabeled rows. An empty
    side contributes zero. ``hard_pseudo_labels`` swaps the smoothed
    unlabeled term for the plain pseudo-label one.
    """
    if labeled.size + unlabeled.size == 0:
        raise EmptyBatchError("both batches are empty")
    c = labeled.logits.shape[1] if labeled.size else unlabeled.logits.shape[1]
    if labeled.size:
        sup = ce_supervised(labeled).scaled(config.lambda1)
    else:
        sup = LossReport(0.0, np.zeros((0, c)))
    if unlabeled.size:
        if hard_pseudo_labels:
            uns = pseudo_label_loss(unlabeled, config.gamma, config.normalize_by_gated)
        else:
            uns = smoothed_unlabeled_loss(unlabeled, config)
        uns = uns.scaled(config.lambda2)
    else:
        uns = LossReport(0.0, np.zeros((0, c)))
    return LossReport(sup.value + uns.value,
                      np.concatenate([sup.grad_logits, uns.grad_logits], axis=0))


def _smoothed_targets(batch: LabeledBatch, config: NoisyLossConfig) -> np.ndarray:
    source = softmax(batch.logits) if config.literal_paper_smoothing else batch.targets
    return smooth_distribution(source, config.delta)


def floored_log(s: np.ndarray, floor: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(s > 0, np.log(np.where(s > 0, s, 1.0)), floor)


def sce_baseline(batch: LabeledBatch, config: NoisyLossConfig | None = None) -> LossReport:
    """Symmetric cross-entropy against the raw one-hot label.

    ``log 0`` in the reverse term is replaced by ``config.log_floor``.
    """
    config = config or NoisyLossConfig()
    n = batch.size
    _require_rows(n)
    fwd, g_fwd = cross_entropy_rows(batch.logits, batch.targets)
    rev, g_rev = reverse_rows(batch.logits, floored_log(batch.targets, config.log_floor))
    value = (config.alpha1 * fwd.sum() + config.alpha2 * rev.sum()) / n
    return LossReport(float(value), (config.alpha1 * g_fwd + config.alpha2 * g_rev) / n)


def smoothed_ce(batch: LabeledBatch, config: NoisyLossConfig | None = None) -> LossReport:
    config = config or NoisyLossConfig()
    n = batch.size
    _require_rows(n)
    values, grads = cross_entropy_rows(batch.logits, _smoothed_targets(batch, config))
    return LossReport(float(values.sum() / n), grads / n)


def smoothed_rce(batch: LabeledBatch, config: NoisyLossConfig | None = None) -> LossReport:
    """Reverse cross-entropy against the smoothed label.

    The smoothed label holds ``delta`` on the observed class and
    ``(1 - delta)/(C - 1)`` elsewhere, so the floor is only used at
    ``delta`` of 0 or 1.
    """
    config = config or NoisyLossConfig()
    n = batch.size
    _require_rows(n)
    log_s = floored_log(_smoothed_targets(batch, config), config.log_floor)
    values, grads = reverse_rows(batch.logits, log_s)
    return LossReport(float(values.sum() / n), grads / n)


def symmetric_noisy_loss(batch: LabeledBatch,
                         config: NoisyLossConfig | None = None) -> LossReport:
    config = config or NoisyLossConfig()
    ce = smoothed_ce(batch, config)
    rce = smoothed_rce(batch, config)
    return LossReport(config.alpha1 * ce.value + config.alpha2 * rce.value,
                      config.alpha1 * ce.grad_logits + config.alpha2 * rce.grad_logits)
