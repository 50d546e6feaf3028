"""Grasp-head losses with missing-label and noisy-label branches.

Two heads are modelled. The approach head scores each (point, view) pair and
decides graspability. The operation head predicts, per (point, depth bin), a
rotation class, a grasp score and a gripper width.

The smoothed self-target and the symmetric losses need a distribution, but
scores and widths are scalars. A scalar ``x`` is turned into one with a
Gaussian soft-binning over fixed value bins::

    logit_k = -(x - center_k)**2 / (2 * sigma**2),  sigma = bin_width / sharpness

and its categorical label is the bin the true value falls into. The default
sharpness of 3 lets a prediction at a bin center reach about 0.98
confidence, while one on a bin edge splits its mass between two bins.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateNormalizerError, InvalidInputError, ShapeMismatchError
from .losses import (
    LossReport,
    MissingLossConfig,
    NoisyLossConfig,
    cross_entropy_rows,
    floored_log,
    reverse_rows,
)
from .prob_core import confidence_gate, smooth_distribution, softmax

ANGLE_GATE_DEG = 5.0


@dataclass(frozen=True)
class CompositeWeights:
    """Term weights; ``n_cls``/``n_reg`` of None mean "count them per batch"."""

    beta1: float = 0.5
    beta2: float = 1.0
    beta3: float = 1.0
    eta2: float = 1.0
    eta3: float = 1.0
    n_cls: int | None = None
    n_reg: int | None = None


@dataclass(frozen=True)
class ValueBins:
    low: float
    high: float
    count: int = 12
    sharpness: float = 3.0

    def __post_init__(self):
        if self.count < 2 or not self.high > self.low or self.sharpness <= 0:
            raise InvalidInputError("value bins need count >= 2, high > low, sharpness > 0")

    @property
    def width(self) -> float:
        return (self.high - self.low) / self.count

    @property
    def centers(self) -> np.ndarray:
        return self.low + (np.arange(self.count) + 0.5) * self.width

    @property
    def sigma(self) -> float:
        return self.width / self.sharpness

    def logits(self, x):
        """Soft-bin logits of shape ``x.shape + (count,)`` and d logits / d x."""
        diff = np.asarray(x, dtype=np.float64)[..., None] - self.centers
        return -0.5 * diff ** 2 / self.sigma ** 2, -diff / self.sigma ** 2

    def index(self, x) -> np.ndarray:
        k = np.floor((np.asarray(x, dtype=np.float64) - self.low) / self.width)
        return np.clip(k, 0, self.count - 1).astype(np.int64)


SCORE_BINS = ValueBins(0.0, 1.0)
WIDTH_BINS = ValueBins(0.0, 0.1)


def smooth_l1(pred, truth):
    """Huber loss with unit threshold; returns ``(value, d value / d pred)``."""
    d = np.asarray(pred, dtype=np.float64) - np.asarray(truth, dtype=np.float64)
    small = np.abs(d) < 1.0
    value = np.where(small, 0.5 * d * d, np.abs(d) - 0.5)
    grad = np.where(small, d, np.sign(d))
    if value.ndim == 0:
        return float(value), float(grad)
    return value, grad


def two_class_softmax_loss(logits, truth):
    """Cross-entropy of a two-way softmax; vectorised over leading axes."""
    g = np.asarray(logits, dtype=np.float64)
    if g.shape[-1] != 2:
        raise ShapeMismatchError("two-class loss needs exactly 2 logits")
    y = np.asarray(truth, dtype=np.int64)
    target = np.stack([1 - y, y], axis=-1).astype(np.float64)
    flat_v, flat_g = cross_entropy_rows(g.reshape(-1, 2), target.reshape(-1, 2))
    value = flat_v.reshape(g.shape[:-1])
    grad = flat_g.reshape(g.shape)
    if value.ndim == 0:
        return float(value), grad
    return value, grad


def sigmoid_cross_entropy(logits, labels):
    """Sum over classes of binary cross-entropy against the one-hot label."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.zeros_like(z)
    np.put_along_axis(y, np.asarray(labels, dtype=np.int64)[..., None], 1.0, axis=-1)
    # max(z, 0) - z y + log(1 + exp(-|z|)) is the stable form.
    value = (np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))).sum(axis=-1)
    return value, 0.5 * (1.0 + np.tanh(0.5 * z)) - y


def self_target_terms(logits, cfg: MissingLossConfig):
    """Unnormalised smoothed self-target loss per distribution.

    Each row contributes ``-sum s log p`` where ``s`` is the smoothed copy of
    its own prediction, only if the prediction is confident. ``s`` is held
    constant for the gradient.
    """
    g = np.asarray(logits, dtype=np.float64)
    shape = g.shape
    flat = g.reshape(-1, shape[-1])
    p = softmax(flat)
    keep = confidence_gate(p, cfg.gamma)
    target = smooth_distribution(p, cfg.xi) * keep[:, None]
    values, grads = cross_entropy_rows(flat, target)
    return values.reshape(shape[:-1]), grads.reshape(shape)


def symmetric_terms(logits, labels, cfg: NoisyLossConfig):
    """Unnormalised ``alpha1 * L_ce + alpha2 * L_rce`` per distribution."""
    g = np.asarray(logits, dtype=np.float64)
    shape = g.shape
    flat = g.reshape(-1, shape[-1])
    if cfg.literal_paper_smoothing:
        source = softmax(flat)
    else:
        source = np.zeros_like(flat)
        source[np.arange(flat.shape[0]), np.asarray(labels).reshape(-1)] = 1.0
    s = smooth_distribution(source, cfg.delta)
    ce_v, ce_g = cross_entropy_rows(flat, s)
    rce_v, rce_g = reverse_rows(flat, floored_log(s, cfg.log_floor))
    values = cfg.alpha1 * ce_v + cfg.alpha2 * rce_v
    grads = cfg.alpha1 * ce_g + cfg.alpha2 * rce_g
    return values.reshape(shape[:-1]), grads.reshape(shape)


def _nan_to_none(a):
    return [None if (isinstance(v, float) and math.isnan(v)) else v for v in a]


def _array(rows, shape, dtype=np.float64):
    return np.array([np.nan if v is None else v for v in rows], dtype=dtype).reshape(shape)


@dataclass(frozen=True)
class GraspCandidateBatch:
    """Approach-head predictions and truths for N points and V views.

    ``view_score_truth`` holds NaN where the score label was removed; None
    means every score label is missing.
    """

    graspable_logits: np.ndarray
    graspable_truth: np.ndarray
    view_scores: np.ndarray
    view_score_truth: np.ndarray | None
    pred_approach: np.ndarray
    true_approach: np.ndarray

    def __post_init__(self):
        n, v = np.shape(self.view_scores)
        if np.shape(self.graspable_logits) != (n, 2) or np.shape(self.graspable_truth) != (n,):
            raise ShapeMismatchError("graspability arrays must be (N, 2) and (N,)")
        if np.shape(self.pred_approach) != (n, v, 3) or np.shape(self.true_approach) != (n, v, 3):
            raise ShapeMismatchError("approach arrays must be (N, V, 3)")
        if self.view_score_truth is not None and np.shape(self.view_score_truth) != (n, v):
            raise ShapeMismatchError("view_score_truth must match view_scores")

    @property
    def shape(self):
        return np.shape(self.view_scores)

    def score_truth_filled(self) -> np.ndarray:
        if self.view_score_truth is None:
            return np.full(self.shape, np.nan)
        return np.asarray(self.view_score_truth, dtype=np.float64)

    def to_dict(self) -> dict:
        n, v = self.shape
        return {
            "n": n, "views": v,
            "graspable_logits": np.ravel(self.graspable_logits).tolist(),
            "graspable_truth": np.ravel(self.graspable_truth).astype(int).tolist(),
            "view_scores": np.ravel(self.view_scores).tolist(),
            "view_score_truth": _nan_to_none(np.ravel(self.score_truth_filled()).tolist()),
            "pred_approach": np.ravel(self.pred_approach).tolist(),
            "true_approach": np.ravel(self.true_approach).tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GraspCandidateBatch":
        n, v = doc["n"], doc["views"]
        return cls(_array(doc["graspable_logits"], (n, 2)),
                   np.array(doc["graspable_truth"], dtype=np.int64).reshape(n),
                   _array(doc["view_scores"], (n, v)),
                   _array(doc["view_score_truth"], (n, v)),
                   _array(doc["pred_approach"], (n, v, 3)),
                   _array(doc["true_approach"], (n, v, 3)))


@dataclass(frozen=True)
class OperationBatch:
    """Operation-head predictions for N points and D depth bins.

    Missing truths: -1 in ``rotation_truth``, NaN in ``score_truth`` and
    ``width_truth``.
    """

    rotation_logits: np.ndarray
    score_pred: np.ndarray
    width_pred: np.ndarray
    rotation_truth: np.ndarray
    score_truth: np.ndarray
    width_truth: np.ndarray
    score_bins: ValueBins = SCORE_BINS
    width_bins: ValueBins = WIDTH_BINS

    def __post_init__(self):
        n, d, k = np.shape(self.rotation_logits)
        for name in ("score_pred", "width_pred", "rotation_truth", "score_truth", "width_truth"):
            if np.shape(getattr(self, name)) != (n, d):
                raise ShapeMismatchError(f"{name} must have shape ({n}, {d})")
        r = np.asarray(self.rotation_truth)
        if np.any((r < -1) | (r >= k)):
            raise InvalidInputError("rotation_truth entries must be -1 or a class index")

    @property
    def num_distance_bins(self) -> int:
        return np.shape(self.rotation_logits)[1]

    def missing(self):
        return (np.asarray(self.rotation_truth) < 0,
                np.isnan(self.score_truth), np.isnan(self.width_truth))

    def to_dict(self) -> dict:
        n, d, k = np.shape(self.rotation_logits)
        return {
            "n": n, "distance_bins": d, "rotation_classes": k,
            "rotation_logits": np.ravel(self.rotation_logits).tolist(),
            "score_pred": np.ravel(self.score_pred).tolist(),
            "width_pred": np.ravel(self.width_pred).tolist(),
            "rotation_truth": np.ravel(self.rotation_truth).astype(int).tolist(),
            "score_truth": _nan_to_none(np.ravel(self.score_truth).tolist()),
            "width_truth": _nan_to_none(np.ravel(self.width_truth).tolist()),
            "score_bins": [self.score_bins.low, self.score_bins.high,
                           self.score_bins.count, self.score_bins.sharpness],
            "width_bins": [self.width_bins.low, self.width_bins.high,
                           self.width_bins.count, self.width_bins.sharpness],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "OperationBatch":
        n, d, k = doc["n"], doc["distance_bins"], doc["rotation_classes"]
        return cls(_array(doc["rotation_logits"], (n, d, k)),
                   _array(doc["score_pred"], (n, d)),
                   _array(doc["width_pred"], (n, d)),
                   np.array(doc["rotation_truth"], dtype=np.int64).reshape(n, d),
                   _array(doc["score_truth"], (n, d)),
                   _array(doc["width_truth"], (n, d)),
                   ValueBins(*doc["score_bins"][:2], int(doc["score_bins"][2]),
                             doc["score_bins"][3]),
                   ValueBins(*doc["width_bins"][:2], int(doc["width_bins"][2]),
                             doc["width_bins"][3]))


def batches_to_json(approach: GraspCandidateBatch, operation: OperationBatch) -> str:
    return json.dumps({"approach": approach.to_dict(), "operation": operation.to_dict()})


def batches_from_json(text: str):
    doc = json.loads(text)
    return (GraspCandidateBatch.from_dict(doc["approach"]),
            OperationBatch.from_dict(doc["operation"]))


def _normalizer(explicit, counted: int, has_terms: bool, name: str) -> float:
    n = counted if explicit is None else explicit
    if has_terms and n < 1:
        raise DegenerateNormalizerError(f"{name} must be >= 1 when its term is evaluated")
    return float(max(n, 1))


def approach_angles_deg(pred, true) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    true = np.asarray(true, dtype=np.float64)
    dots = np.clip((pred * true).sum(axis=-1), -1.0, 1.0)
    return np.degrees(np.arccos(dots))


def approach_loss(batch: GraspCandidateBatch, cfg: MissingLossConfig | None = None,
                  w: CompositeWeights | None = None,
                  score_bins: ValueBins = SCORE_BINS) -> LossReport:
    """Graspability classification plus gated view-score regression.

    A (point, view) term counts only for graspable points whose predicted
    approach lies within 5 degrees of the true one. Scores with a label use
    smooth L1; scores without one use the smoothed self-target loss on their
    soft-binned distribution.
    """
    cfg = cfg or MissingLossConfig()
    w = w or CompositeWeights()
    n, _ = batch.shape
    if n == 0:
        raise DegenerateNormalizerError("approach loss needs at least one point")
    cls_v, cls_g = two_class_softmax_loss(batch.graspable_logits, batch.graspable_truth)
    n_cls = _normalizer(w.n_cls, n, True, "n_cls")

    truth = batch.score_truth_filled()
    present = ~np.isnan(truth)
    angles = approach_angles_deg(batch.pred_approach, batch.true_approach)
    gate = (np.asarray(batch.graspable_truth)[:, None] == 1) & (angles < ANGLE_GATE_DEG)
    n_gate = int(gate.sum())
    if not present.any() and n_gate == 0:
        raise DegenerateNormalizerError("every score label is missing and no view passes the gate")
    n_reg = _normalizer(w.n_reg, n_gate, n_gate > 0, "n_reg")

    scores = np.asarray(batch.view_scores, dtype=np.float64)
    reg_v = np.zeros_like(scores)
    reg_g = np.zeros_like(scores)
    with_gt = gate & present
    v, g = smooth_l1(scores[with_gt], truth[with_gt])
    reg_v[with_gt], reg_g[with_gt] = v, g
    without_gt = gate & ~present
    logits, dlogits = score_bins.logits(scores[without_gt])
    v, g = self_target_terms(logits, cfg)
    reg_v[without_gt] = v
    reg_g[without_gt] = (g * dlogits).sum(axis=-1)

    value = cls_v.sum() / n_cls + w.beta1 * reg_v.sum() / n_reg
    grad_cls = cls_g / n_cls
    return LossReport(float(value), grad_cls,
                      {"graspable_logits": grad_cls, "view_scores": w.beta1 * reg_g / n_reg})


def operation_loss_missing(batch: OperationBatch, cfg: MissingLossConfig | None = None,
                           w: CompositeWeights | None = None) -> LossReport:
    """Per-depth-bin mean losses for rotation, score and width, summed over bins.

    Labeled entries use sigmoid cross-entropy (rotation) and smooth L1 (score,
    width). Entries whose label is missing use the smoothed self-target loss.
    """
    cfg = cfg or MissingLossConfig()
    w = w or CompositeWeights()
    n = np.shape(batch.rotation_logits)[0]
    if n == 0:
        raise DegenerateNormalizerError("operation loss needs at least one point")
    n_cls = _normalizer(w.n_cls, n, True, "n_cls")
    n_reg = _normalizer(w.n_reg, n, True, "n_reg")
    miss_r, miss_s, miss_w = batch.missing()

    rot = np.asarray(batch.rotation_logits, dtype=np.float64)
    rot_v = np.zeros(rot.shape[:2])
    rot_g = np.zeros_like(rot)
    v, g = sigmoid_cross_entropy(rot[~miss_r], np.asarray(batch.rotation_truth)[~miss_r])
    rot_v[~miss_r], rot_g[~miss_r] = v, g
    v, g = self_target_terms(rot[miss_r], cfg)
    rot_v[miss_r], rot_g[miss_r] = v, g

    def regression(pred, truth, missing, bins):
        pred = np.asarray(pred, dtype=np.float64)
        vals = np.zeros_like(pred)
        grads = np.zeros_like(pred)
        v, g = smooth_l1(pred[~missing], np.asarray(truth)[~missing])
        vals[~missing], grads[~missing] = v, g
        logits, dlogits = bins.logits(pred[missing])
        v, g = self_target_terms(logits, cfg)
        vals[missing] = v
        grads[missing] = (g * dlogits).sum(axis=-1)
        return vals, grads

    s_v, s_g = regression(batch.score_pred, batch.score_truth, miss_s, batch.score_bins)
    w_v, w_g = regression(batch.width_pred, batch.width_truth, miss_w, batch.width_bins)

    value = rot_v.sum() / n_cls + w.beta2 * s_v.sum() / n_reg + w.beta3 * w_v.sum() / n_reg
    grad_rot = rot_g / n_cls
    return LossReport(float(value), grad_rot, {
        "rotation_logits": grad_rot,
        "score_pred": w.beta2 * s_g / n_reg,
        "width_pred": w.beta3 * w_g / n_reg,
    })


def operation_loss_noisy(batch: OperationBatch, cfg: NoisyLossConfig | None = None,
                         w: CompositeWeights | None = None) -> LossReport:
    """Symmetric smoothed loss on rotation classes and on binned score and width."""
    cfg = cfg or NoisyLossConfig()
    w = w or CompositeWeights()
    if any(m.any() for m in batch.missing()):
        raise InvalidInputError("noisy operation loss needs every truth; use the missing variant")
    n = np.shape(batch.rotation_logits)[0]
    if n == 0:
        raise DegenerateNormalizerError("operation loss needs at least one point")
    n_cls = _normalizer(w.n_cls, n, True, "n_cls")
    n_reg = _normalizer(w.n_reg, n, True, "n_reg")

    rot_v, rot_g = symmetric_terms(batch.rotation_logits, batch.rotation_truth, cfg)

    def binned(pred, truth, bins):
        logits, dlogits = bins.logits(pred)
        v, g = symmetric_terms(logits, bins.index(truth), cfg)
        return v, (g * dlogits).sum(axis=-1)

    s_v, s_g = binned(batch.score_pred, batch.score_truth, batch.score_bins)
    w_v, w_g = binned(batch.width_pred, batch.width_truth, batch.width_bins)

    value = rot_v.sum() / n_cls + w.eta2 * s_v.sum() / n_reg + w.eta3 * w_v.sum() / n_reg
    grad_rot = rot_g / n_cls
    return LossReport(float(value), grad_rot, {
        "rotation_logits": grad_rot,
        "score_pred": w.eta2 * s_g / n_reg,
        "width_pred": w.eta3 * w_g / n_reg,
    })
