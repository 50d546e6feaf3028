"""Probability primitives shared by every loss.

All functions act on the last axis, so a single vector of shape ``(C,)`` and
a batch of shape ``(N, C)`` are both accepted.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateDimensionError, InvalidInputError


def _as_scores(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        raise InvalidInputError("expected at least one axis of class scores")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("non-finite entry in input")
    if x.shape[-1] < 2:
        raise DegenerateDimensionError(f"need at least 2 classes, got {x.shape[-1]}")
    return x


def softmax(logits) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    g = _as_scores(logits)
    z = np.exp(g - g.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    g = _as_scores(logits)
    shifted = g - g.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def smooth_distribution(p, xi: float) -> np.ndarray:
    """Blend a distribution with the mass it leaves on the other classes.

    Each entry becomes ``xi * p + (1 - xi) / (C - 1) * (1 - p)``. The result
    stays on the simplex for any ``xi`` in [0, 1]; ``xi = 1`` is the identity
    and ``xi = 1/C`` sends everything to the uniform distribution.
    """
    p = _as_scores(p)
    xi = check_coefficient(xi)
    c = p.shape[-1]
    return xi * p + (1.0 - xi) / (c - 1) * (1.0 - p)


def check_coefficient(value: float, name: str = "smoothing coefficient") -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise InvalidInputError(f"{name} must lie in [0, 1], got {value}")
    return value


def confidence_gate(p, gamma: float):
    """True where the largest probability strictly exceeds ``gamma``."""
    p = np.asarray(p, dtype=np.float64)
    return p.max(axis=-1) > gamma


def argmax_label(p):
    """Index of the largest entry; ``np.argmax`` already breaks ties low."""
    return np.argmax(np.asarray(p), axis=-1)


def one_hot(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise InvalidInputError("label index out of range")
    out = np.zeros(labels.shape + (num_classes,), dtype=np.float64)
    np.put_along_axis(out, labels[..., None], 1.0, axis=-1)
    return out
