"""Seeded grasp-candidate corpora for exercising the composite losses."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..composite_losses import (
    ANGLE_GATE_DEG,
    SCORE_BINS,
    WIDTH_BINS,
    GraspCandidateBatch,
    OperationBatch,
)
from ..corruption import apply_multiplicative_noise, plan_corruption
from ..errors import InvalidInputError
from ..grasp_repr import Grasp, compose_rotation, decouple_rotation
from .data import rotation_bin

CONFIDENT_LOGIT = 20.0


@dataclass(frozen=True)
class GraspCorpusParams:
    n_points: int = 16
    views: int = 8
    distance_bins: int = 4
    rotation_classes: int = 12
    perturbation: float = 1.0
    missing_ratio: float = 0.5
    noise_ratio: float = 0.5
    noise_factor: float = 0.5

    def __post_init__(self):
        if self.n_points < 2 or self.views < 3 or self.distance_bins < 1:
            raise InvalidInputError("corpus needs n_points >= 2, views >= 3, distance_bins >= 1")
        if self.rotation_classes < 2 or self.perturbation < 0:
            raise InvalidInputError("invalid rotation classes or perturbation")
        for r in (self.missing_ratio, self.noise_ratio):
            if not 0.0 <= r <= 1.0:
                raise InvalidInputError("ratios must lie in [0, 1]")


@dataclass(frozen=True)
class GraspCorpus:
    grasps: list
    approach: GraspCandidateBatch
    approach_clean: GraspCandidateBatch
    operation: OperationBatch
    operation_clean: OperationBatch
    operation_noisy: OperationBatch


def _random_units(rng, shape):
    v = rng.normal(size=shape + (3,))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _tilt(v, angle_deg, rng):
    """Rotate unit ``v`` by ``angle_deg`` toward a random perpendicular."""
    u = rng.normal(size=3)
    u -= (u @ v) * v
    u /= np.linalg.norm(u)
    a = math.radians(angle_deg)
    out = math.cos(a) * v + math.sin(a) * u
    return out / np.linalg.norm(out)


def _rotation_logits(labels, k, rng, perturbation):
    logits = np.full(labels.shape + (k,), -CONFIDENT_LOGIT)
    np.put_along_axis(logits, labels[..., None], CONFIDENT_LOGIT, axis=-1)
    return logits + perturbation * rng.normal(size=logits.shape)


def gen_grasp_synthetic(params: GraspCorpusParams, seed: int) -> GraspCorpus:
    """Ground-truth grasps plus predictions perturbed from them.

    With ``perturbation = 0`` the predictions equal the truths (graspability
    and rotation logits at +/-20). Point 0 is graspable with view 0 aligned
    (passes the 5 degree gate) and view 1 tilted by 8 degrees when
    perturbed; point 1 is never graspable, so both gate outcomes occur. Among
    masked entries the first is made confident and the second flat, so the
    confidence gate also sees both outcomes.
    """
    rng = np.random.default_rng(seed)
    n, v, d, k = params.n_points, params.views, params.distance_bins, params.rotation_classes
    eps = params.perturbation

    graspable = rng.integers(0, 2, size=n)
    graspable[0], graspable[1] = 1, 0
    sign = 2.0 * graspable - 1.0
    g_logits = np.stack([-sign, sign], axis=1) * CONFIDENT_LOGIT + eps * rng.normal(size=(n, 2))

    true_v = _random_units(rng, (n, v))
    tilt = eps * rng.uniform(0.0, 2.0 * ANGLE_GATE_DEG, size=(n, v))
    tilt[0, 0] = 0.0
    if eps > 0:
        tilt[0, 1] = 8.0
    pred_v = np.array([[_tilt(true_v[i, j], tilt[i, j], rng) for j in range(v)]
                       for i in range(n)])
    score_true = rng.uniform(0.1, 0.95, size=(n, v))
    score_pred = score_true + 0.05 * eps * rng.normal(size=(n, v))

    view_plan = plan_corruption(n * v, "mcar", params.missing_ratio, seed=seed)
    view_missing = view_plan.mask().reshape(n, v)
    masked_truth = np.where(view_missing, np.nan, score_true)
    masked_idx = np.argwhere(view_missing)
    if len(masked_idx) >= 2:
        i, j = masked_idx[0]
        score_pred[i, j] = SCORE_BINS.centers[SCORE_BINS.index(score_pred[i, j])]
        i, j = masked_idx[1]
        score_pred[i, j] = SCORE_BINS.low + SCORE_BINS.width * round(
            (score_pred[i, j] - SCORE_BINS.low) / SCORE_BINS.width)
        score_pred[i, j] = min(max(score_pred[i, j], SCORE_BINS.width), SCORE_BINS.high - SCORE_BINS.width)

    approach_clean = GraspCandidateBatch(g_logits, graspable, score_pred, score_true,
                                         pred_v, true_v)
    approach = GraspCandidateBatch(g_logits, graspable, score_pred, masked_truth, pred_v, true_v)

    # One true grasp per (point, depth bin); its rotation class comes from
    # decoupling the composed orientation.
    grasp_v = _random_units(rng, (n, d))
    in_plane = rng.uniform(-math.pi, math.pi, size=(n, d))
    widths = rng.uniform(0.01, 0.095, size=(n, d))
    centers = rng.uniform(-0.5, 0.5, size=(n, d, 3))
    grasps, angles = [], np.zeros((n, d))
    for i in range(n):
        for b in range(d):
            R = compose_rotation(grasp_v[i, b], in_plane[i, b])
            grasps.append(Grasp(R, centers[i, b], widths[i, b]))
            angles[i, b] = decouple_rotation(R)[1] % (2.0 * math.pi)
    rot_true = rotation_bin(angles, k)
    rot_logits = _rotation_logits(rot_true, k, rng, eps)
    op_score_true = rng.uniform(0.1, 0.95, size=(n, d))
    op_score_pred = op_score_true + 0.05 * eps * rng.normal(size=(n, d))
    width_pred = widths + 0.005 * eps * rng.normal(size=(n, d))

    operation_clean = OperationBatch(rot_logits, op_score_pred, width_pred, rot_true,
                                     op_score_true, widths)

    # Missing labels remove whole (rotation, score, width) records.
    op_plan = plan_corruption(n * d, "mcar", params.missing_ratio, seed=seed + 1)
    op_missing = op_plan.mask().reshape(n, d)
    masked_rot_logits = rot_logits.copy()
    masked_cells = np.argwhere(op_missing)
    if len(masked_cells) >= 2:
        i, b = masked_cells[1]
        masked_rot_logits[i, b] = 0.1 * rng.normal(size=k)
    operation = OperationBatch(masked_rot_logits, op_score_pred, width_pred,
                               np.where(op_missing, -1, rot_true),
                               np.where(op_missing, np.nan, op_score_true),
                               np.where(op_missing, np.nan, widths))

    # Noisy labels: a proportion of angle and width truths scaled by one factor.
    noise_plan = plan_corruption(n * d, "multiplicative", params.noise_ratio,
                                 params.noise_factor, seed=seed + 2)
    noisy_angles = apply_multiplicative_noise(angles.reshape(-1), noise_plan).reshape(n, d)
    noisy_widths = apply_multiplicative_noise(widths.reshape(-1), noise_plan).reshape(n, d)
    operation_noisy = OperationBatch(rot_logits, op_score_pred, width_pred,
                                     rotation_bin(noisy_angles, k), op_score_true, noisy_widths,
                                     SCORE_BINS, WIDTH_BINS)
    return GraspCorpus(grasps, approach, approach_clean, operation, operation_clean,
                       operation_noisy)
